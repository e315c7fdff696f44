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

// Multi-site harness: topology config, per-site daemons (LRM, gatekeeper,
// grid manager), virtual clocks with skew, fault injection and scenario
// scripts.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "minigrid/gram.hpp"
#include "minigrid/gridq.hpp"
#include "minigrid/gsi.hpp"
#include "minigrid/lrm.hpp"
#include "minigrid/sim.hpp"
#include "minigrid/staging.hpp"
#include "minigrid/tasks.hpp"

namespace minigrid::testbed {

// Well-known node paths.
inline constexpr std::string_view kTrustDir = "/etc/grid-security/certificates";
inline constexpr std::string_view kGridmapPath = "/etc/grid-security/grid-mapfile";
inline constexpr std::string_view kCaDir = "/var/lib/minigrid/ca";
inline constexpr std::string_view kSandboxRoot = "/var/lib/minigrid/sandbox";
inline constexpr std::string_view kLogDir = "/var/log/minigrid";

inline constexpr Duration kPumpInterval = seconds(1);

/// 2013-02-05 09:00:00, the virtual time every testbed starts at.
Timestamp base_epoch();

std::string home_dir(std::string_view user);
std::string credential_dir(std::string_view user);

struct SiteSpec {
  std::string name;
  std::string host;
  int slots = 2;
  std::string dialect = "condor";
  Duration skew{0};
  std::set<std::string> roles = {"lrm", "gatekeeper"};
  std::optional<std::string> jobmanager;  // extra jobmanager name for the site's adapter
  int first_cluster = 1;
  Duration max_skew = gsi::kDefaultMaxSkew;

  bool has_role(std::string_view role) const { return roles.count(std::string(role)) > 0; }
};

struct UserSpec {
  std::string name;
  std::string dn;
  std::string passphrase;
};

struct TestbedConfig {
  std::uint64_t seed = 1;
  std::vector<SiteSpec> sites;
  std::vector<UserSpec> users;
  Duration latency = kDefaultLatency;
};

/// Line-oriented config:
///   seed <n>
///   site <name> host <dns> slots <n> dialect <d> skew <s> roles <r,...>
///        [jobmanager <name>] [first_cluster <n>] [max_skew <s>]
///   user <name> dn "<DN>" passphrase <p>
/// Throws ParseError naming the line.
TestbedConfig parse_testbed_config(std::string_view text);

/// DuplicateSiteName, NoCaRole (not exactly one ca), Usage for bad slots,
/// dialects or roles.
void validate(const TestbedConfig& config);

/// One-line description used by `mg-testbed up`.
std::string announce(const SiteSpec& site);

/// Writes the files a site needs before its daemons start: task programs,
/// trust anchors, grid-mapfile and user credentials.
void provision_site(const NodeFs& fs, const TestbedConfig& config, const gsi::CertificateAuthority& ca,
                    const std::vector<gsi::IssuedCredential>& user_creds);

/// Creates the CA on `fs` and issues every configured user a credential.
std::pair<gsi::CertificateAuthority, std::vector<gsi::IssuedCredential>> create_ca(const NodeFs& fs,
                                                                                  const TestbedConfig& config,
                                                                                  const SiteSpec& ca_site,
                                                                                  gsi::SeedSource& seed);

/// The daemons of one site behind a single message handler. Not
/// thread-safe; callers serialize access.
class SiteDaemon {
 public:
  SiteDaemon(SiteSpec spec, NodeFs fs, Transport& transport, std::uint64_t seed);

  std::optional<wire::Message> handle(const wire::Message& msg, const std::string& from);
  void pump();
  void grid_tick();

  const SiteSpec& spec() const { return spec_; }
  const NodeFs& fs() const { return fs_; }
  Timestamp now() const { return transport_.now(spec_.name); }
  lrm::Lrm& lrm() { return *lrm_; }
  gram::Gatekeeper& gatekeeper() { return *gatekeeper_; }
  gridq::GridManager& grid_manager() { return *grid_manager_; }
  gram::LrmAdapter& adapter() { return *adapter_; }

  /// Appends "<node time> <text>" to /var/log/minigrid/<daemon>.log.
  void log(std::string_view daemon, std::string_view text, std::optional<Timestamp> at = std::nullopt);
  static std::string log_path(std::string_view daemon);

 private:
  wire::Message handle_submit(const wire::Message& msg);
  wire::Message handle_query(const wire::Message& msg);
  wire::Message handle_remove(const wire::Message& msg);

  SiteSpec spec_;
  NodeFs fs_;
  Transport& transport_;
  gsi::DeterministicSeed seed_;
  TaskExecutor executor_;
  std::unique_ptr<lrm::Lrm> lrm_;
  std::unique_ptr<gram::LrmAdapter> adapter_;
  std::unique_ptr<staging::SandboxStore> sandboxes_;
  std::unique_ptr<gram::Gatekeeper> gatekeeper_;
  std::unique_ptr<gridq::GridManager> grid_manager_;
};

enum class FaultKind { ClockSkew, DropProxy, KillAdapter, CorruptTransfer, Partition, AdapterVersionMismatch };

inline constexpr FaultKind kAllFaults[] = {FaultKind::ClockSkew,       FaultKind::DropProxy,
                                           FaultKind::KillAdapter,     FaultKind::CorruptTransfer,
                                           FaultKind::Partition,       FaultKind::AdapterVersionMismatch};

std::string_view to_string(FaultKind kind);
std::optional<FaultKind> fault_from_string(std::string_view name);

struct FaultSpec {
  FaultKind kind = FaultKind::Partition;
  std::string target;  // site name or host
  Duration skew{0};    // clock_skew only
  std::optional<Timestamp> from;
  std::optional<Timestamp> until;
};

/// The deterministic in-process testbed.
class Testbed {
 public:
  Testbed(TestbedConfig config, std::filesystem::path run_dir);
  Testbed(const Testbed&) = delete;
  Testbed& operator=(const Testbed&) = delete;

  const TestbedConfig& config() const { return config_; }
  const std::filesystem::path& run_dir() const { return run_dir_; }
  EventLoop& loop() { return loop_; }
  SimTransport& transport() { return transport_; }
  gsi::SeedSource& client_seed() { return client_seed_; }
  /// Unique across every client invocation on this testbed.
  std::string next_request_id() { return "client-" + std::to_string(++request_counter_); }

  Timestamp now() const { return loop_.now(); }
  Timestamp now(const std::string& site) { return transport_.now(site); }
  std::size_t advance(Duration dt);

  /// Accepts a site name or host name; throws UnknownTarget.
  SiteDaemon& site(const std::string& name);
  std::vector<std::string> site_names() const;
  NodeFs fs(const std::string& site) const;

  void inject_fault(FaultSpec fault);
  /// Returns false when no matching fault was active.
  bool clear_fault(FaultKind kind, const std::string& target);
  void clear_all_faults();
  std::vector<FaultSpec> active_faults() const;

  /// Every message hop delivered or dropped, in order.
  const std::vector<std::string>& trace() const { return trace_; }

 private:
  struct ActiveFault {
    FaultSpec spec;
    std::string site;
    bool applied = false;
    std::map<std::string, std::string> saved_files;
  };
  void apply(ActiveFault& fault);
  void revert(ActiveFault& fault);
  bool filter(const std::string& from, const std::string& to, wire::Message& msg);
  bool fault_on(FaultKind kind, const std::string& site) const;
  void schedule_timers(SiteDaemon& daemon);

  TestbedConfig config_;
  std::filesystem::path run_dir_;
  EventLoop loop_;
  SimTransport transport_;
  gsi::DeterministicSeed client_seed_;
  std::map<std::string, std::unique_ptr<SiteDaemon>> sites_;
  std::vector<std::shared_ptr<ActiveFault>> faults_;
  std::vector<std::shared_ptr<std::function<void()>>> timers_;
  std::vector<std::string> trace_;
  std::uint64_t request_counter_ = 0;
};

/// Runs a scenario script against `testbed` and returns the transcript.
///   at <seconds> <user>@<site> <command...> [<<< <stdin line>]
///   expect <substring>        (checks the previous command's output)
///   expect-exit <code>
///   advance <seconds>
///   write <user>@<site> <path>  ... lines ...  end
/// Comments start with '#'. Failures throw ScriptError naming the step.
std::string run_scenario(Testbed& testbed, std::string_view script);

}  // namespace minigrid::testbed
