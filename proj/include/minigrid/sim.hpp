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

// Deterministic in-process delivery: a discrete-event loop plus a Transport
// that routes framed messages between site endpoints with fixed latency.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "minigrid/transport.hpp"

namespace minigrid::testbed {

inline constexpr Duration kDefaultLatency = std::chrono::milliseconds(10);

/// Events fire in (time, origin, sequence) order, one at a time.
class EventLoop {
 public:
  explicit EventLoop(Timestamp start) : now_(start) {}

  Timestamp now() const { return now_; }
  void schedule(Timestamp at, std::string origin, std::function<void()> fn);

  /// Fires the next event if it is due at or before `until`. Returns false
  /// when nothing is due.
  bool step(Timestamp until);
  /// Fires everything due at or before `until`, then sets the clock there.
  std::size_t run_until(Timestamp until);

  bool in_event() const { return in_event_; }
  std::size_t pending() const { return queue_.size(); }

 private:
  struct Event {
    Timestamp at;
    std::string origin;
    std::uint64_t seq = 0;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.at != b.at) return a.at > b.at;
      if (a.origin != b.origin) return a.origin > b.origin;
      return a.seq > b.seq;
    }
  };

  Timestamp now_;
  std::uint64_t seq_ = 0;
  bool in_event_ = false;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
};

class SimTransport : public Transport {
 public:
  using Handler = std::function<std::optional<wire::Message>(const wire::Message&, const std::string& from)>;
  /// Inspects each hop; returning false drops the message. May alter it.
  using Filter = std::function<bool(const std::string& from, const std::string& to, wire::Message& msg)>;
  using Trace = std::function<void(const std::string& line)>;

  explicit SimTransport(EventLoop& loop, Duration latency = kDefaultLatency) : loop_(loop), latency_(latency) {}

  /// Registers a site reachable by its name and by each alias (host names).
  void add_node(const std::string& site, const std::vector<std::string>& aliases, Handler handler);
  std::optional<std::string> resolve(const std::string& name) const;

  void set_offset(const std::string& node, Duration offset) { offsets_[node] = offset; }
  Duration offset(const std::string& node) const;
  void set_filter(Filter filter) { filter_ = std::move(filter); }
  void set_trace(Trace trace) { trace_ = std::move(trace); }
  Duration latency() const { return latency_; }

  Timestamp now(const std::string& node) override;
  wire::Message call(const std::string& from, const std::string& to, wire::Message msg, Duration timeout) override;
  void post(const std::string& from, const std::string& to, wire::Message msg, ReplyHandler on_reply) override;
  void sleep(const std::string& from, Duration dt) override;

 private:
  void send(const std::string& from, const std::string& to_site, wire::Message msg, ReplyHandler on_reply);
  bool pass(const std::string& from, const std::string& to, wire::Message& msg);

  EventLoop& loop_;
  Duration latency_;
  std::map<std::string, Handler> handlers_;
  std::map<std::string, std::string> names_;
  std::map<std::string, Duration> offsets_;
  Filter filter_;
  Trace trace_;
};

}  // namespace minigrid::testbed
