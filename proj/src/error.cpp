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

#include "minigrid/error.hpp"

#include <array>
#include <utility>

namespace minigrid {
namespace {

struct CodeInfo {
  Errc code;
  std::string_view name;
  std::string_view hint;
};

constexpr std::array kCodes{
    CodeInfo{Errc::Usage, "Usage", "check the command synopsis"},
    CodeInfo{Errc::ParseError, "ParseError", "fix the reported line"},
    CodeInfo{Errc::MalformedLine, "MalformedLine", "submit file lines have the form `Key = Value`"},
    CodeInfo{Errc::MissingQueue, "MissingQueue", "end the submit file with a `Queue` line"},
    CodeInfo{Errc::MissingExecutable, "MissingExecutable", "add an `Executable = <path>` line"},
    CodeInfo{Errc::UnknownUniverse, "UnknownUniverse", "use `Universe = Vanilla` or `Universe = Globus`"},
    CodeInfo{Errc::MalformedGridResource, "MalformedGridResource",
             "use `grid_resource = gt5 <host>/jobmanager-<lrm>` with Universe = Globus"},
    CodeInfo{Errc::GlobusWithoutGridResource, "GlobusWithoutGridResource",
             "Globus universe jobs need a grid_resource line"},
    CodeInfo{Errc::MalformedContact, "MalformedContact", "contact strings look like host[:port]/jobmanager-<lrm>"},
    CodeInfo{Errc::UnknownDialect, "UnknownDialect", "registered dialects are condor and sgelike"},
    CodeInfo{Errc::NotGridUniverse, "NotGridUniverse", "only Universe = Globus jobs are routed to a gatekeeper"},
    CodeInfo{Errc::FrameError, "FrameError", "peer sent a malformed protocol frame"},
    CodeInfo{Errc::SpoolFailure, "SpoolFailure", "check that the executable exists on the submit node"},
    CodeInfo{Errc::IllegalTransition, "IllegalTransition", "the job is not in a state that allows this action"},
    CodeInfo{Errc::UnknownJob, "UnknownJob", "list jobs with mg-q or mg-history"},
    CodeInfo{Errc::PoolUnreachable, "PoolUnreachable", "check that the site's daemons are up (mg-testbed up)"},
    CodeInfo{Errc::AlreadyInitialized, "AlreadyInitialized", "the CA directory already holds a root certificate"},
    CodeInfo{Errc::InvalidLifetime, "InvalidLifetime", "lifetimes must be positive"},
    CodeInfo{Errc::BadPassphrase, "BadPassphrase", "re-enter the GRID pass phrase"},
    CodeInfo{Errc::UserCertExpired, "UserCertExpired", "request a new user certificate (mg-ca sign)"},
    CodeInfo{Errc::NoProxyFound, "NoProxyFound", "user must create a proxy credential: run mg-proxy-init"},
    CodeInfo{Errc::FutureCertificate, "FutureCertificate",
             "synchronize the machines' clocks with the reference time server"},
    CodeInfo{Errc::Expired, "Expired", "renew the proxy credential with mg-proxy-init"},
    CodeInfo{Errc::UnknownIssuer, "UnknownIssuer", "install the issuing CA certificate in the trusted CA directory"},
    CodeInfo{Errc::BadSignature, "BadSignature", "the certificate was altered; obtain a fresh one"},
    CodeInfo{Errc::MalformedCertificate, "MalformedCertificate", "the certificate file is damaged"},
    CodeInfo{Errc::AuthFailed, "AuthFailed", "user must create a proxy credential: run mg-proxy-init"},
    CodeInfo{Errc::MissingSource, "MissingSource", "a staged file was not transferred"},
    CodeInfo{Errc::DigestMismatch, "DigestMismatch", "file was corrupted in transit; resubmit the job"},
    CodeInfo{Errc::SandboxMissing, "SandboxMissing", "the job sandbox was already cleaned up"},
    CodeInfo{Errc::PathEscape, "PathEscape", "staged file names must stay inside the job sandbox"},
    CodeInfo{Errc::NotAuthorized, "NotAuthorized", "ask the site administrator to add your DN to the gridmap file"},
    CodeInfo{Errc::UnknownJobmanager, "UnknownJobmanager", "the gatekeeper has no adapter for that jobmanager"},
    CodeInfo{Errc::AdapterFailure, "AdapterFailure", "check the gatekeeper log on the remote site"},
    CodeInfo{Errc::VersionMismatch, "VersionMismatch",
             "gatekeeper and LRM adapter builds do not match; install matching components"},
    CodeInfo{Errc::UnknownRequest, "UnknownRequest", "the gatekeeper does not know this request id"},
    CodeInfo{Errc::Timeout, "Timeout",
             "no answer from the remote site; check connectivity and the gatekeeper and LRM log files"},
    CodeInfo{Errc::DuplicateSiteName, "DuplicateSiteName", "site names must be unique"},
    CodeInfo{Errc::NoCaRole, "NoCaRole", "exactly one site must carry the ca role"},
    CodeInfo{Errc::UnknownTarget, "UnknownTarget", "name an existing site"},
    CodeInfo{Errc::ScriptError, "ScriptError", "fix the scenario script"},
    CodeInfo{Errc::StorageFailure, "StorageFailure", "check file permissions and free space"},
};

const CodeInfo& info(Errc code) {
  for (const auto& entry : kCodes) {
    if (entry.code == code) return entry;
  }
  return kCodes.front();
}

}  // namespace

std::string_view to_string(Errc code) { return info(code).name; }

Errc errc_from_string(std::string_view name) {
  for (const auto& entry : kCodes) {
    if (entry.name == name) return entry.code;
  }
  return Errc::AdapterFailure;
}

std::string_view remediation_for(Errc code) { return info(code).hint; }

bool is_auth_failure(Errc code) {
  switch (code) {
    case Errc::BadPassphrase:
    case Errc::UserCertExpired:
    case Errc::NoProxyFound:
    case Errc::FutureCertificate:
    case Errc::Expired:
    case Errc::UnknownIssuer:
    case Errc::BadSignature:
    case Errc::MalformedCertificate:
    case Errc::AuthFailed:
    case Errc::NotAuthorized:
      return true;
    default:
      return false;
  }
}

int exit_status_for(Errc code) {
  if (is_auth_failure(code)) return 3;
  switch (code) {
    case Errc::Usage:
    case Errc::ParseError:
    case Errc::MalformedLine:
    case Errc::MissingQueue:
    case Errc::MissingExecutable:
    case Errc::UnknownUniverse:
    case Errc::MalformedGridResource:
    case Errc::GlobusWithoutGridResource:
    case Errc::MalformedContact:
    case Errc::UnknownDialect:
    case Errc::NotGridUniverse:
    case Errc::AlreadyInitialized:
    case Errc::InvalidLifetime:
    case Errc::UnknownTarget:
    case Errc::ScriptError:
      return 2;
    case Errc::Timeout:
    case Errc::PoolUnreachable:
      return 5;
    default:
      return 4;
  }
}

Error::Error(Errc code, std::string detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail),
      code_(code),
      detail_(std::move(detail)) {}

}  // namespace minigrid
