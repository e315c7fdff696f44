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

#include <algorithm>

#include <fmt/format.h>

#include "minigrid/error.hpp"
#include "minigrid/testbed.hpp"

namespace minigrid::testbed {

namespace {

constexpr std::array<std::pair<FaultKind, std::string_view>, 6> kFaultNames = {{
    {FaultKind::ClockSkew, "clock_skew"},
    {FaultKind::DropProxy, "drop_proxy"},
    {FaultKind::KillAdapter, "kill_adapter"},
    {FaultKind::CorruptTransfer, "corrupt_transfer"},
    {FaultKind::Partition, "partition"},
    {FaultKind::AdapterVersionMismatch, "adapter_version_mismatch"},
}};

// Keeps the client stream apart from every site's stream.
constexpr std::uint64_t kClientSeedSalt = 0x9e3779b97f4a7c15ULL;

}  // namespace

std::string_view to_string(FaultKind kind) {
  for (const auto& [k, name] : kFaultNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::optional<FaultKind> fault_from_string(std::string_view name) {
  for (const auto& [k, n] : kFaultNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

Testbed::Testbed(TestbedConfig config, std::filesystem::path run_dir)
    : config_(std::move(config)),
      run_dir_(std::move(run_dir)),
      loop_(base_epoch()),
      transport_(loop_, config_.latency),
      client_seed_(config_.seed ^ kClientSeedSalt) {
  validate(config_);
  for (const auto& spec : config_.sites) std::filesystem::remove_all(run_dir_ / spec.name);

  const auto ca_site = std::find_if(config_.sites.begin(), config_.sites.end(),
                                    [](const SiteSpec& s) { return s.has_role("ca"); });
  gsi::DeterministicSeed ca_seed(config_.seed);
  auto [ca, creds] = create_ca(NodeFs(run_dir_ / ca_site->name), config_, *ca_site, ca_seed);

  transport_.set_filter(
      [this](const std::string& from, const std::string& to, wire::Message& msg) { return filter(from, to, msg); });
  transport_.set_trace([this](const std::string& line) { trace_.push_back(line); });

  std::uint64_t index = 0;
  for (const auto& spec : config_.sites) {
    NodeFs fs(run_dir_ / spec.name);
    provision_site(fs, config_, ca, creds);
    transport_.set_offset(spec.name, spec.skew);
    auto daemon = std::make_unique<SiteDaemon>(spec, fs, transport_, config_.seed + ++index);
    auto* raw = daemon.get();
    transport_.add_node(spec.name, {spec.host},
                        [raw](const wire::Message& msg, const std::string& from) { return raw->handle(msg, from); });
    sites_[spec.name] = std::move(daemon);
    schedule_timers(*raw);
  }
}

void Testbed::schedule_timers(SiteDaemon& daemon) {
  auto pump = std::make_shared<std::function<void()>>();
  auto tick = std::make_shared<std::function<void()>>();
  const auto name = daemon.spec().name;
  std::weak_ptr<std::function<void()>> weak_pump = pump;
  std::weak_ptr<std::function<void()>> weak_tick = tick;
  *pump = [this, &daemon, name, weak_pump] {
    daemon.pump();
    if (auto self = weak_pump.lock()) loop_.schedule(loop_.now() + kPumpInterval, name, *self);
  };
  *tick = [this, &daemon, name, weak_tick] {
    daemon.grid_tick();
    if (auto self = weak_tick.lock()) loop_.schedule(loop_.now() + gridq::kTickInterval, name, *self);
  };
  loop_.schedule(loop_.now() + kPumpInterval, name, *pump);
  loop_.schedule(loop_.now() + gridq::kTickInterval, name, *tick);
  timers_.push_back(pump);
  timers_.push_back(tick);
}

std::size_t Testbed::advance(Duration dt) { return loop_.run_until(loop_.now() + dt); }

SiteDaemon& Testbed::site(const std::string& name) {
  if (auto it = sites_.find(name); it != sites_.end()) return *it->second;
  for (auto& [_, daemon] : sites_) {
    if (daemon->spec().host == name) return *daemon;
  }
  throw Error(Errc::UnknownTarget, fmt::format("no site or host named '{}'", name));
}

std::vector<std::string> Testbed::site_names() const {
  std::vector<std::string> names;
  for (const auto& spec : config_.sites) names.push_back(spec.name);
  return names;
}

NodeFs Testbed::fs(const std::string& site) const {
  for (const auto& [name, daemon] : sites_) {
    if (name == site || daemon->spec().host == site) return daemon->fs();
  }
  throw Error(Errc::UnknownTarget, fmt::format("no site or host named '{}'", site));
}

void Testbed::apply(ActiveFault& fault) {
  if (fault.applied) return;
  auto& daemon = site(fault.site);
  switch (fault.spec.kind) {
    case FaultKind::ClockSkew:
      transport_.set_offset(fault.site, daemon.spec().skew + fault.spec.skew);
      break;
    case FaultKind::DropProxy:
      for (const auto& user : config_.users) {
        const auto path = gsi::CredentialDir{credential_dir(user.name)}.proxy_path();
        if (auto content = daemon.fs().read(path)) {
          fault.saved_files[path] = *content;
          daemon.fs().remove_all(path);
        }
      }
      break;
    case FaultKind::KillAdapter:
      daemon.adapter().set_killed(true);
      break;
    case FaultKind::AdapterVersionMismatch:
      daemon.adapter().set_version_mismatch(true);
      break;
    case FaultKind::CorruptTransfer:
    case FaultKind::Partition:
      break;  // enforced by the transport filter
  }
  fault.applied = true;
}

void Testbed::revert(ActiveFault& fault) {
  if (!fault.applied) return;
  auto& daemon = site(fault.site);
  switch (fault.spec.kind) {
    case FaultKind::ClockSkew:
      transport_.set_offset(fault.site, daemon.spec().skew);
      break;
    case FaultKind::DropProxy:
      for (const auto& [path, content] : fault.saved_files) daemon.fs().write(path, content);
      fault.saved_files.clear();
      break;
    case FaultKind::KillAdapter:
      daemon.adapter().set_killed(false);
      break;
    case FaultKind::AdapterVersionMismatch:
      daemon.adapter().set_version_mismatch(false);
      break;
    case FaultKind::CorruptTransfer:
    case FaultKind::Partition:
      break;
  }
  fault.applied = false;
}

void Testbed::inject_fault(FaultSpec spec) {
  auto fault = std::make_shared<ActiveFault>();
  fault->site = site(spec.target).spec().name;
  fault->spec = std::move(spec);
  faults_.push_back(fault);
  std::weak_ptr<ActiveFault> weak = fault;
  if (fault->spec.from && *fault->spec.from > loop_.now()) {
    loop_.schedule(*fault->spec.from, "fault", [this, weak] {
      if (auto f = weak.lock()) apply(*f);
    });
  } else {
    apply(*fault);
  }
  if (fault->spec.until) {
    loop_.schedule(*fault->spec.until, "fault", [this, weak] {
      if (auto f = weak.lock()) {
        revert(*f);
        std::erase(faults_, f);
      }
    });
  }
}

bool Testbed::clear_fault(FaultKind kind, const std::string& target) {
  const auto name = site(target).spec().name;
  bool found = false;
  for (auto it = faults_.begin(); it != faults_.end();) {
    if ((*it)->spec.kind == kind && (*it)->site == name) {
      revert(**it);
      it = faults_.erase(it);
      found = true;
    } else {
      ++it;
    }
  }
  return found;
}

void Testbed::clear_all_faults() {
  // Newest first so stacked file snapshots unwind in order.
  for (auto it = faults_.rbegin(); it != faults_.rend(); ++it) revert(**it);
  faults_.clear();
}

std::vector<FaultSpec> Testbed::active_faults() const {
  std::vector<FaultSpec> out;
  for (const auto& f : faults_) {
    if (f->applied) out.push_back(f->spec);
  }
  return out;
}

bool Testbed::fault_on(FaultKind kind, const std::string& site) const {
  return std::any_of(faults_.begin(), faults_.end(),
                     [&](const auto& f) { return f->applied && f->spec.kind == kind && f->site == site; });
}

bool Testbed::filter(const std::string& from, const std::string& to, wire::Message& msg) {
  if (fault_on(FaultKind::Partition, from) || fault_on(FaultKind::Partition, to)) return false;
  const bool transfer = msg.type == wire::kXferPut || msg.type == wire::kXferGet;
  if (transfer && !msg.payload.empty() &&
      (fault_on(FaultKind::CorruptTransfer, from) || fault_on(FaultKind::CorruptTransfer, to))) {
    msg.payload[msg.payload.size() / 2] ^= 0x20;
  }
  return true;
}

}  // namespace minigrid::testbed
