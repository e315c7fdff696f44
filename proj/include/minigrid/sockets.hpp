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

// Loopback TCP mode: the same framed messages as the in-process testbed,
// carried over real sockets with one listener and one timer thread per
// site. Used for integration smoke runs; deterministic tests use SimTransport.

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "minigrid/testbed.hpp"
#include "minigrid/transport.hpp"

namespace minigrid::net {

struct RegistryEntry {
  std::string site;
  std::string host;
  int port = 0;
  std::string root;  // host directory backing the site's file system
};

/// Contact addresses and the shared clock origin of a running socket testbed.
/// Text form:
///   clock <wall_ms> <virtual_ms>
///   site <name> <host> <port> <root>
struct Registry {
  std::int64_t wall_start_ms = 0;
  std::int64_t virtual_start_ms = 0;
  std::vector<RegistryEntry> sites;

  std::string render() const;
  static Registry parse(std::string_view text);
  /// Looks up a site name or host name.
  const RegistryEntry* find(std::string_view name) const;
};

class SocketTransport : public Transport {
 public:
  explicit SocketTransport(Registry registry);
  ~SocketTransport() override;
  SocketTransport(const SocketTransport&) = delete;
  SocketTransport& operator=(const SocketTransport&) = delete;

  /// Virtual start plus wall time elapsed since the registry's origin.
  Timestamp now(const std::string& node) override;
  wire::Message call(const std::string& from, const std::string& to, wire::Message msg, Duration timeout) override;
  /// Performs the exchange on a worker thread; `on_reply` runs while holding
  /// the lock registered for `from`.
  void post(const std::string& from, const std::string& to, wire::Message msg, ReplyHandler on_reply) override;
  void sleep(const std::string& from, Duration dt) override;

  void set_lock(const std::string& node, std::mutex* mutex);
  const Registry& registry() const { return registry_; }

  /// Waits for outstanding post() workers.
  void drain();

 private:
  Registry registry_;
  std::mutex mu_;
  std::map<std::string, std::mutex*> locks_;
  std::vector<std::thread> workers_;
};

/// Every site of a config served over loopback sockets from one process.
class SocketTestbed {
 public:
  SocketTestbed(testbed::TestbedConfig config, std::filesystem::path run_dir);
  ~SocketTestbed();
  SocketTestbed(const SocketTestbed&) = delete;
  SocketTestbed& operator=(const SocketTestbed&) = delete;

  /// Written to <run_dir>/registry once every listener is bound.
  std::filesystem::path registry_path() const { return run_dir_ / "registry"; }
  const Registry& registry() const { return transport_->registry(); }
  void stop();

 private:
  struct Site {
    std::unique_ptr<testbed::SiteDaemon> daemon;
    std::mutex mu;
    int listen_fd = -1;
    std::thread server;
    std::thread timers;
  };
  void serve(Site& site);
  void tick(Site& site);

  testbed::TestbedConfig config_;
  std::filesystem::path run_dir_;
  std::unique_ptr<SocketTransport> transport_;
  std::vector<std::unique_ptr<Site>> sites_;
  std::atomic<bool> stopping_{false};
};

}  // namespace minigrid::net
