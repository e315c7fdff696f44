// Copyright 2026 The minigrid Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace minigrid {

/// Stable machine-readable error codes shared by every module, the wire
/// protocol's ERROR message and the CLI.
enum class Errc {
  // parsing / usage
  Usage,
  ParseError,
  MalformedLine,
  MissingQueue,
  MissingExecutable,
  UnknownUniverse,
  MalformedGridResource,
  GlobusWithoutGridResource,
  MalformedContact,
  UnknownDialect,
  NotGridUniverse,
  FrameError,
  // lrm
  SpoolFailure,
  IllegalTransition,
  UnknownJob,
  PoolUnreachable,
  // gsi
  AlreadyInitialized,
  InvalidLifetime,
  BadPassphrase,
  UserCertExpired,
  NoProxyFound,
  FutureCertificate,
  Expired,
  UnknownIssuer,
  BadSignature,
  MalformedCertificate,
  AuthFailed,
  // staging
  MissingSource,
  DigestMismatch,
  SandboxMissing,
  PathEscape,
  // gram
  NotAuthorized,
  UnknownJobmanager,
  AdapterFailure,
  VersionMismatch,
  UnknownRequest,
  Timeout,
  // testbed
  DuplicateSiteName,
  NoCaRole,
  UnknownTarget,
  ScriptError,
  StorageFailure,
};

std::string_view to_string(Errc code);
/// Inverse of to_string; unknown names map to Errc::AdapterFailure.
Errc errc_from_string(std::string_view name);

/// One-line human remediation hint for a code (may be empty).
std::string_view remediation_for(Errc code);

/// CLI exit status for a code: 2 usage, 3 auth, 4 remote error, 5 timeout.
int exit_status_for(Errc code);

/// True for codes that describe an authentication failure.
bool is_auth_failure(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string detail);

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace minigrid
