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

#include <functional>
#include <string>

#include "minigrid/time.hpp"
#include "minigrid/wire.hpp"

namespace minigrid {

using ReplyHandler = std::function<void(const wire::Message&)>;

/// Message delivery and clocks between nodes. Nodes are named by site; a
/// destination may be given by site name or head host name.
class Transport {
 public:
  virtual ~Transport() = default;

  /// The clock of `node`, including its skew.
  virtual Timestamp now(const std::string& node) = 0;

  /// Request/reply for a client process on `from`. ERROR replies are
  /// returned, not thrown. Throws Error(Timeout) naming `to` when no reply
  /// arrives within `timeout`.
  virtual wire::Message call(const std::string& from, const std::string& to, wire::Message msg,
                             Duration timeout) = 0;

  /// Fire-and-continue request from a daemon on `from`; `on_reply` runs on
  /// that daemon's command stream if and when a reply arrives.
  virtual void post(const std::string& from, const std::string& to, wire::Message msg, ReplyHandler on_reply) = 0;

  /// Lets `dt` pass for a client process on `from`.
  virtual void sleep(const std::string& from, Duration dt) = 0;
};

}  // namespace minigrid
