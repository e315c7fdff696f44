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

// Submit files, contact strings, and the LRM-neutral job request with its
// translations into native LRM dialects.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace minigrid::jobspec {

enum class Universe { Vanilla, Globus };

struct ContactString {
  std::string host;
  std::optional<int> port;
  std::string service;  // "jobmanager-<lrm>"

  /// The `<lrm>` part of the service.
  std::string lrm() const;
  /// host[:port]/service, byte-identical to the parsed text.
  std::string str() const;

  bool operator==(const ContactString&) const = default;
};

struct GridResource {
  std::string protocol;  // only "gt5"
  ContactString contact;

  bool operator==(const GridResource&) const = default;
};

struct SubmitDescription {
  Universe universe = Universe::Vanilla;
  std::string executable;
  std::vector<std::string> arguments;
  std::string output;
  std::string error;
  std::string log;
  std::optional<std::string> input;
  std::optional<std::string> requirements;
  std::optional<std::string> rank;
  int priority = 0;
  std::optional<GridResource> grid_resource;
  int queue_count = 1;

  bool operator==(const SubmitDescription&) const = default;
};

/// Parses `Key = Value` lines (keys case-insensitive, later keys override,
/// `#` comments ignored). Every `Queue [n]` line emits a description built
/// from the keys seen so far. Errors carry the 1-based line number.
std::vector<SubmitDescription> parse_submit_file(std::string_view text);

/// host[:port]/jobmanager-<lrm>; throws Error(MalformedContact).
ContactString parse_contact_string(std::string_view text);

struct StageItem {
  std::string name;    // path on the submitting node
  std::string digest;  // hex content digest; empty until the client hashes the file

  bool operator==(const StageItem&) const = default;
};

struct GramJobRequest {
  std::string executable;
  std::vector<std::string> arguments;
  std::string stdout_name = "stdout";
  std::string stderr_name = "stderr";
  std::optional<std::string> stdin_name;
  std::string owner_dn;
  std::string target_lrm;
  std::vector<StageItem> stage_in;
  std::string request_id;

  bool operator==(const GramJobRequest&) const = default;
};

/// The fields a native dialect carries; what parse(render(req)) must preserve.
struct NativeJob {
  std::string executable;
  std::vector<std::string> arguments;
  std::string stdout_name;
  std::string stderr_name;
  std::optional<std::string> stdin_name;

  bool operator==(const NativeJob&) const = default;
};

/// Registered dialect names: "condor" and "sgelike".
const std::vector<std::string>& registered_dialects();

/// Throws Error(UnknownDialect) for unregistered names.
std::string render_dialect(const GramJobRequest& req, std::string_view dialect);
NativeJob parse_dialect(std::string_view text, std::string_view dialect);

/// Converts a native job into a Vanilla submit description for the local LRM.
SubmitDescription to_submit_description(const NativeJob& job);

/// Requires a Globus-universe description; throws Error(NotGridUniverse).
/// Stage items list the executable (and input, when given) with empty digests.
std::pair<ContactString, GramJobRequest> to_gram_request(const SubmitDescription& sd, const std::string& owner_dn,
                                                         const std::string& request_id);

}  // namespace minigrid::jobspec
