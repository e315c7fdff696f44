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

// The mg-* command suite. Each invocation is a short-lived client on one
// site that talks to the daemons through a Transport.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "minigrid/gsi.hpp"
#include "minigrid/nodefs.hpp"
#include "minigrid/transport.hpp"

namespace minigrid::testbed {
class Testbed;
}

namespace minigrid::cli {

inline constexpr Duration kQueryTimeout = seconds(10);
/// Upper bound on frames rendered by `mg-q --watch`.
inline constexpr int kMaxWatchFrames = 120;

struct Context {
  Transport& transport;
  std::string site;  // transport node the command runs on
  std::string user;
  /// File system of a site, by site name.
  std::function<NodeFs(const std::string& site)> fs_for;
  /// Resolves a site or host name to a site name; empty when unknown.
  std::function<std::string(const std::string& name)> resolve;
  std::string cwd;  // empty means the user's home directory
  std::string stdin_data;
  gsi::SeedSource& seed;
  std::function<std::string()> next_request_id;
  std::map<std::string, std::string> env;
  /// Set in in-process mode; admin commands act on it directly.
  testbed::Testbed* testbed = nullptr;
};

struct Result {
  std::string out;
  std::string err;
  int status = 0;
};

/// Runs one command line, e.g. {"mg-q", "--watch", "2"}. Never throws for
/// command errors: they are rendered into `err` as
///   "<command>: <Code>: <detail>" followed by "hint: <remediation>".
Result run(Context& ctx, const std::vector<std::string>& args);

/// A context for `user` on `site` of an in-process testbed. Throws
/// UnknownTarget for an unknown site.
Context testbed_context(testbed::Testbed& testbed, const std::string& user, const std::string& site,
                        std::string stdin_data = {});

/// Names of every command in the suite.
const std::vector<std::string>& command_names();

}  // namespace minigrid::cli
