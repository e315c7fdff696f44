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

#include "minigrid/sim.hpp"

#include <fmt/format.h>

#include "minigrid/error.hpp"

namespace minigrid::testbed {

void EventLoop::schedule(Timestamp at, std::string origin, std::function<void()> fn) {
  queue_.push(Event{std::max(at, now_), std::move(origin), seq_++, std::move(fn)});
}

bool EventLoop::step(Timestamp until) {
  if (queue_.empty() || queue_.top().at > until) return false;
  auto event = queue_.top();
  queue_.pop();
  now_ = event.at;
  in_event_ = true;
  try {
    event.fn();
  } catch (...) {
    in_event_ = false;
    throw;
  }
  in_event_ = false;
  return true;
}

std::size_t EventLoop::run_until(Timestamp until) {
  std::size_t fired = 0;
  while (step(until)) ++fired;
  if (until > now_) now_ = until;
  return fired;
}

void SimTransport::add_node(const std::string& site, const std::vector<std::string>& aliases, Handler handler) {
  handlers_[site] = std::move(handler);
  names_[site] = site;
  for (const auto& alias : aliases) names_[alias] = site;
}

std::optional<std::string> SimTransport::resolve(const std::string& name) const {
  auto it = names_.find(name);
  if (it == names_.end()) return std::nullopt;
  return it->second;
}

Duration SimTransport::offset(const std::string& node) const {
  auto it = offsets_.find(node);
  return it == offsets_.end() ? Duration{0} : it->second;
}

Timestamp SimTransport::now(const std::string& node) { return loop_.now() + offset(node); }

bool SimTransport::pass(const std::string& from, const std::string& to, wire::Message& msg) {
  if (filter_ && !filter_(from, to, msg)) {
    if (trace_) trace_(fmt::format("{} {} -> {} {} dropped", format_iso(loop_.now()), from, to, msg.type));
    return false;
  }
  if (trace_) trace_(fmt::format("{} {} -> {} {}", format_iso(loop_.now()), from, to, msg.type));
  return true;
}

void SimTransport::send(const std::string& from, const std::string& to_site, wire::Message msg,
                        ReplyHandler on_reply) {
  auto shared = std::make_shared<wire::Message>(std::move(msg));
  loop_.schedule(loop_.now() + latency_, from, [this, from, to_site, shared, on_reply = std::move(on_reply)] {
    if (!pass(from, to_site, *shared)) return;
    auto reply = handlers_.at(to_site)(*shared, from);
    if (!reply) return;
    auto back = std::make_shared<wire::Message>(std::move(*reply));
    loop_.schedule(loop_.now() + latency_, to_site, [this, from, to_site, back, on_reply] {
      if (!pass(to_site, from, *back)) return;
      if (on_reply) on_reply(*back);
    });
  });
}

wire::Message SimTransport::call(const std::string& from, const std::string& to, wire::Message msg,
                                 Duration timeout) {
  if (loop_.in_event()) throw Error(Errc::Usage, "blocking call from inside a daemon event");
  const auto deadline = loop_.now() + timeout;
  const auto site = resolve(to);
  if (!site) {
    loop_.run_until(deadline);
    throw Error(Errc::Timeout, fmt::format("cannot resolve host {}", to));
  }
  auto result = std::make_shared<std::optional<wire::Message>>();
  send(from, *site, std::move(msg), [result](const wire::Message& reply) { *result = reply; });
  while (!*result && loop_.step(deadline)) {
  }
  if (!*result) {
    loop_.run_until(deadline);
    throw Error(Errc::Timeout,
                fmt::format("no reply from {} within {} s", to,
                            std::chrono::duration_cast<std::chrono::seconds>(timeout).count()));
  }
  return std::move(**result);
}

void SimTransport::post(const std::string& from, const std::string& to, wire::Message msg, ReplyHandler on_reply) {
  const auto site = resolve(to);
  if (!site) return;  // unanswered, like a lost packet
  send(from, *site, std::move(msg), std::move(on_reply));
}

void SimTransport::sleep(const std::string&, Duration dt) {
  if (loop_.in_event()) throw Error(Errc::Usage, "sleep from inside a daemon event");
  loop_.run_until(loop_.now() + dt);
}

}  // namespace minigrid::testbed
