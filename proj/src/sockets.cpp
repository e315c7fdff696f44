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

#include "minigrid/sockets.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "minigrid/error.hpp"
#include "minigrid/strings.hpp"

namespace minigrid::net {

namespace {

constexpr Duration kServerReadTimeout = seconds(5);
constexpr Duration kPostTimeout = seconds(10);
constexpr auto kPollSlice = std::chrono::milliseconds(50);

std::int64_t wall_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::FrameError, fmt::format("send failed: {}", std::strerror(errno)));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

/// Reads one frame, or nullopt when the peer closes or the deadline passes.
std::optional<wire::Message> read_frame(int fd, std::chrono::steady_clock::time_point deadline) {
  wire::FrameReader reader;
  char buf[65536];
  while (true) {
    if (auto msg = reader.next()) return msg;
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return std::nullopt;
    pollfd pfd{fd, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(std::min<std::int64_t>(left.count(), 1000)));
    if (ready < 0 && errno != EINTR) return std::nullopt;
    if (ready <= 0) continue;
    const auto n = ::recv(fd, buf, sizeof buf, 0);
    if (n <= 0) return std::nullopt;
    reader.feed(std::string_view(buf, static_cast<std::size_t>(n)));
  }
}

int connect_loopback(int port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) return -1;
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(fd);
    return -1;
  }
  return fd;
}

int listen_loopback() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw Error(Errc::StorageFailure, fmt::format("socket: {}", std::strerror(errno)));
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = 0;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd, 16) != 0) {
    ::close(fd);
    throw Error(Errc::StorageFailure, fmt::format("cannot listen on loopback: {}", std::strerror(errno)));
  }
  return fd;
}

int bound_port(int fd) {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  return ntohs(addr.sin_port);
}

}  // namespace

// ---------------------------------------------------------------------------
// Registry

std::string Registry::render() const {
  std::string out = fmt::format("clock {} {}\n", wall_start_ms, virtual_start_ms);
  for (const auto& s : sites) out += fmt::format("site {} {} {} {}\n", s.site, s.host, s.port, s.root);
  return out;
}

Registry Registry::parse(std::string_view text) {
  Registry r;
  const auto lines = strings::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto f = strings::split_ws(lines[i]);
    if (f.empty()) continue;
    try {
      if (f[0] == "clock" && f.size() == 3) {
        r.wall_start_ms = std::stoll(f[1]);
        r.virtual_start_ms = std::stoll(f[2]);
        continue;
      }
      if (f[0] == "site" && f.size() == 5) {
        r.sites.push_back({f[1], f[2], std::stoi(f[3]), f[4]});
        continue;
      }
    } catch (const std::exception&) {
    }
    throw Error(Errc::ParseError, fmt::format("registry line {}: '{}'", i + 1, lines[i]));
  }
  return r;
}

const RegistryEntry* Registry::find(std::string_view name) const {
  for (const auto& s : sites) {
    if (s.site == name || s.host == name) return &s;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// SocketTransport

SocketTransport::SocketTransport(Registry registry) : registry_(std::move(registry)) {}

SocketTransport::~SocketTransport() { drain(); }

Timestamp SocketTransport::now(const std::string&) {
  return from_epoch_ms(registry_.virtual_start_ms + (wall_ms() - registry_.wall_start_ms));
}

wire::Message SocketTransport::call(const std::string& from, const std::string& to, wire::Message msg,
                                    Duration timeout) {
  const auto* entry = registry_.find(to);
  if (!entry) throw Error(Errc::Timeout, fmt::format("cannot resolve host {}", to));
  const int fd = connect_loopback(entry->port);
  if (fd < 0) throw Error(Errc::Timeout, fmt::format("cannot reach {} at 127.0.0.1:{}", to, entry->port));
  msg.set("sender", from);
  std::optional<wire::Message> reply;
  try {
    write_all(fd, wire::encode_frame(msg));
    reply = read_frame(fd, std::chrono::steady_clock::now() + timeout);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  if (!reply) {
    throw Error(Errc::Timeout,
                fmt::format("no reply from {} within {} s", to,
                            std::chrono::duration_cast<std::chrono::seconds>(timeout).count()));
  }
  return std::move(*reply);
}

void SocketTransport::post(const std::string& from, const std::string& to, wire::Message msg,
                           ReplyHandler on_reply) {
  std::lock_guard lock(mu_);
  workers_.emplace_back([this, from, to, msg = std::move(msg), on_reply = std::move(on_reply)]() mutable {
    std::optional<wire::Message> reply;
    try {
      reply = call(from, to, std::move(msg), kPostTimeout);
    } catch (const Error&) {
      return;  // unanswered, like a lost packet
    }
    std::mutex* site_lock = nullptr;
    {
      std::lock_guard guard(mu_);
      if (auto it = locks_.find(from); it != locks_.end()) site_lock = it->second;
    }
    if (!on_reply) return;
    if (site_lock) {
      std::lock_guard guard(*site_lock);
      on_reply(*reply);
    } else {
      on_reply(*reply);
    }
  });
}

void SocketTransport::sleep(const std::string&, Duration dt) { std::this_thread::sleep_for(dt); }

void SocketTransport::set_lock(const std::string& node, std::mutex* mutex) {
  std::lock_guard lock(mu_);
  locks_[node] = mutex;
}

void SocketTransport::drain() {
  while (true) {
    std::vector<std::thread> pending;
    {
      std::lock_guard lock(mu_);
      pending.swap(workers_);
    }
    if (pending.empty()) return;
    for (auto& t : pending) t.join();
  }
}

// ---------------------------------------------------------------------------
// SocketTestbed

SocketTestbed::SocketTestbed(testbed::TestbedConfig config, std::filesystem::path run_dir)
    : config_(std::move(config)), run_dir_(std::move(run_dir)) {
  testbed::validate(config_);
  std::filesystem::create_directories(run_dir_);
  for (const auto& spec : config_.sites) std::filesystem::remove_all(run_dir_ / spec.name);

  const auto ca_site = std::find_if(config_.sites.begin(), config_.sites.end(),
                                    [](const testbed::SiteSpec& s) { return s.has_role("ca"); });
  gsi::DeterministicSeed ca_seed(config_.seed);
  auto [ca, creds] = testbed::create_ca(NodeFs(run_dir_ / ca_site->name), config_, *ca_site, ca_seed);

  Registry registry;
  registry.wall_start_ms = wall_ms();
  registry.virtual_start_ms = to_epoch_ms(testbed::base_epoch());
  for (const auto& spec : config_.sites) {
    auto site = std::make_unique<Site>();
    site->listen_fd = listen_loopback();
    registry.sites.push_back({spec.name, spec.host, bound_port(site->listen_fd),
                              std::filesystem::absolute(run_dir_ / spec.name).string()});
    sites_.push_back(std::move(site));
  }
  transport_ = std::make_unique<SocketTransport>(registry);

  std::uint64_t index = 0;
  for (std::size_t i = 0; i < config_.sites.size(); ++i) {
    const auto& spec = config_.sites[i];
    NodeFs fs(run_dir_ / spec.name);
    testbed::provision_site(fs, config_, ca, creds);
    auto& site = *sites_[i];
    site.daemon = std::make_unique<testbed::SiteDaemon>(spec, fs, *transport_, config_.seed + ++index);
    transport_->set_lock(spec.name, &site.mu);
  }
  std::ofstream(registry_path()) << registry.render();
  for (auto& site : sites_) {
    site->server = std::thread([this, s = site.get()] { serve(*s); });
    site->timers = std::thread([this, s = site.get()] { tick(*s); });
  }
}

SocketTestbed::~SocketTestbed() { stop(); }

void SocketTestbed::stop() {
  if (stopping_.exchange(true)) return;
  for (auto& site : sites_) {
    if (site->server.joinable()) site->server.join();
    if (site->timers.joinable()) site->timers.join();
  }
  for (auto& site : sites_) {
    if (site->listen_fd >= 0) ::close(site->listen_fd);
    site->listen_fd = -1;
  }
  transport_->drain();
}

void SocketTestbed::serve(Site& site) {
  while (!stopping_) {
    pollfd pfd{site.listen_fd, POLLIN, 0};
    if (::poll(&pfd, 1, static_cast<int>(kPollSlice.count())) <= 0) continue;
    const int fd = ::accept(site.listen_fd, nullptr, nullptr);
    if (fd < 0) continue;
    try {
      if (auto msg = read_frame(fd, std::chrono::steady_clock::now() + kServerReadTimeout)) {
        const auto from = msg->get("sender").value_or("unknown");
        std::optional<wire::Message> reply;
        {
          std::lock_guard lock(site.mu);
          reply = site.daemon->handle(*msg, from);
        }
        if (reply) write_all(fd, wire::encode_frame(*reply));
      }
    } catch (const Error& e) {
      std::lock_guard lock(site.mu);
      site.daemon->log("gatekeeper", fmt::format("connection dropped: {}", e.what()));
    }
    ::close(fd);
  }
}

void SocketTestbed::tick(Site& site) {
  auto next_pump = std::chrono::steady_clock::now() + testbed::kPumpInterval;
  auto next_tick = std::chrono::steady_clock::now() + gridq::kTickInterval;
  while (!stopping_) {
    std::this_thread::sleep_for(kPollSlice);
    const auto t = std::chrono::steady_clock::now();
    std::lock_guard lock(site.mu);
    if (t >= next_pump) {
      site.daemon->pump();
      next_pump += testbed::kPumpInterval;
    }
    if (t >= next_tick) {
      site.daemon->grid_tick();
      next_tick += gridq::kTickInterval;
    }
  }
}

}  // namespace minigrid::net
