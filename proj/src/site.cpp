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

#include <charconv>

#include <fmt/format.h>

#include "minigrid/error.hpp"
#include "minigrid/strings.hpp"
#include "minigrid/testbed.hpp"

namespace minigrid::testbed {

namespace {

long long parse_number(const std::string& text, std::size_t line_no, std::string_view what) {
  std::string_view digits = text;
  if (!digits.empty() && digits.front() == '+') digits.remove_prefix(1);
  long long v = 0;
  const auto* end = digits.data() + digits.size();
  const auto r = std::from_chars(digits.data(), end, v);
  if (digits.empty() || r.ec != std::errc{} || r.ptr != end) {
    throw Error(Errc::ParseError, fmt::format("config line {}: {} '{}' is not a number", line_no, what, text));
  }
  return v;
}

}  // namespace

Timestamp base_epoch() { return make_time(2013, 2, 5, 9, 0, 0); }

std::string home_dir(std::string_view user) { return fmt::format("/home/{}", user); }
std::string credential_dir(std::string_view user) { return fmt::format("/home/{}/.globus", user); }

TestbedConfig parse_testbed_config(std::string_view text) {
  TestbedConfig config;
  const auto lines = strings::split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const auto line_no = n + 1;
    const auto line = strings::trim(lines[n]);
    if (line.empty() || line.front() == '#') continue;
    const auto tok = strings::tokenize_arguments(line);
    auto fail = [&](std::string_view why) {
      return Error(Errc::ParseError, fmt::format("config line {}: {}", line_no, why));
    };
    if (tok[0] == "seed") {
      if (tok.size() != 2) throw fail("expected: seed <n>");
      config.seed = static_cast<std::uint64_t>(parse_number(tok[1], line_no, "seed"));
    } else if (tok[0] == "latency_ms") {
      if (tok.size() != 2) throw fail("expected: latency_ms <n>");
      config.latency = std::chrono::milliseconds(parse_number(tok[1], line_no, "latency"));
    } else if (tok[0] == "site") {
      if (tok.size() < 2 || tok.size() % 2 != 0) throw fail("expected: site <name> followed by key/value pairs");
      SiteSpec site;
      site.name = tok[1];
      bool has_host = false;
      for (std::size_t i = 2; i + 1 < tok.size(); i += 2) {
        const auto& key = tok[i];
        const auto& value = tok[i + 1];
        if (key == "host") {
          site.host = value;
          has_host = true;
        } else if (key == "slots") {
          site.slots = static_cast<int>(parse_number(value, line_no, "slots"));
        } else if (key == "dialect") {
          site.dialect = value;
        } else if (key == "skew") {
          site.skew = seconds(parse_number(value, line_no, "skew"));
        } else if (key == "roles") {
          site.roles.clear();
          std::size_t start = 0;
          while (start <= value.size()) {
            const auto comma = value.find(',', start);
            const auto role = value.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            if (!role.empty()) site.roles.insert(role);
            if (comma == std::string::npos) break;
            start = comma + 1;
          }
        } else if (key == "jobmanager") {
          site.jobmanager = value;
        } else if (key == "first_cluster") {
          site.first_cluster = static_cast<int>(parse_number(value, line_no, "first_cluster"));
        } else if (key == "max_skew") {
          site.max_skew = seconds(parse_number(value, line_no, "max_skew"));
        } else {
          throw fail(fmt::format("unknown site key '{}'", key));
        }
      }
      if (!has_host) throw fail("site needs a host");
      config.sites.push_back(std::move(site));
    } else if (tok[0] == "user") {
      if (tok.size() != 6 || tok[2] != "dn" || tok[4] != "passphrase") {
        throw fail("expected: user <name> dn \"<DN>\" passphrase <p>");
      }
      config.users.push_back({tok[1], tok[3], tok[5]});
    } else {
      throw fail(fmt::format("unknown directive '{}'", tok[0]));
    }
  }
  return config;
}

void validate(const TestbedConfig& config) {
  std::set<std::string> names;
  std::set<std::string> hosts;
  int cas = 0;
  for (const auto& site : config.sites) {
    if (!names.insert(site.name).second) {
      throw Error(Errc::DuplicateSiteName, fmt::format("site '{}' is defined twice", site.name));
    }
    if (!hosts.insert(site.host).second) {
      throw Error(Errc::DuplicateSiteName, fmt::format("host '{}' is used by two sites", site.host));
    }
    if (site.slots < 1) throw Error(Errc::Usage, fmt::format("site '{}' needs at least one slot", site.name));
    const auto& dialects = jobspec::registered_dialects();
    if (std::find(dialects.begin(), dialects.end(), site.dialect) == dialects.end()) {
      throw Error(Errc::UnknownDialect, fmt::format("site '{}' uses unknown dialect '{}'", site.name, site.dialect));
    }
    for (const auto& role : site.roles) {
      if (role != "lrm" && role != "gatekeeper" && role != "ca") {
        throw Error(Errc::Usage, fmt::format("site '{}' has unknown role '{}'", site.name, role));
      }
    }
    if (site.has_role("ca")) ++cas;
  }
  if (cas != 1) throw Error(Errc::NoCaRole, fmt::format("exactly one site must hold the ca role, found {}", cas));
}

std::string announce(const SiteSpec& site) {
  std::string roles;
  for (const auto& r : {"lrm", "gatekeeper", "ca"}) {
    if (site.has_role(r)) roles += (roles.empty() ? "" : ",") + std::string(r);
  }
  return fmt::format("site {} up: host {} slots {} dialect {} roles {}", site.name, site.host, site.slots,
                     site.dialect, roles);
}

std::pair<gsi::CertificateAuthority, std::vector<gsi::IssuedCredential>> create_ca(const NodeFs& fs,
                                                                                  const TestbedConfig& config,
                                                                                  const SiteSpec& ca_site,
                                                                                  gsi::SeedSource& seed) {
  // Issued a day before the base epoch so modest negative skews stay valid.
  const auto issued = base_epoch() - hours(24);
  auto ca = gsi::CertificateAuthority::init(fs, std::string(kCaDir), "simpleCA-" + ca_site.host, issued, seed);
  std::vector<gsi::IssuedCredential> creds;
  for (const auto& user : config.users) {
    creds.push_back(ca.issue(user.dn, hours(24 * 365), user.passphrase, issued, seed));
  }
  return {std::move(ca), std::move(creds)};
}

void provision_site(const NodeFs& fs, const TestbedConfig& config, const gsi::CertificateAuthority& ca,
                    const std::vector<gsi::IssuedCredential>& user_creds) {
  for (const auto& name : task_names()) fs.write("/bin/" + name, task_program(name));
  fs.write(fmt::format("{}/{}.pem", kTrustDir, ca.root().key_id.substr(0, 8)), gsi::certificate_to_pem(ca.root()));
  gsi::Gridmap gridmap;
  for (std::size_t i = 0; i < config.users.size(); ++i) {
    const auto& user = config.users[i];
    gridmap.add(user.dn, user.name);
    const gsi::CredentialDir dir{credential_dir(user.name)};
    fs.write(dir.cert_path(), gsi::certificate_to_pem(user_creds[i].cert));
    fs.write(dir.key_path(), gsi::private_key_to_pem(user_creds[i].key));
  }
  fs.write(kGridmapPath, gridmap.render());
  fs.make_dirs(kLogDir);
}

// ---------------------------------------------------------------------------
// SiteDaemon

SiteDaemon::SiteDaemon(SiteSpec spec, NodeFs fs, Transport& transport, std::uint64_t seed)
    : spec_(std::move(spec)), fs_(std::move(fs)), transport_(transport), seed_(seed), executor_(spec_.host) {
  lrm::LrmConfig config;
  config.host = spec_.host;
  config.slots = spec_.slots;
  config.first_cluster = spec_.first_cluster;
  lrm_ = std::make_unique<lrm::Lrm>(config, fs_, executor_, now());
  lrm_->set_observer([this](const lrm::LrmEvent& e) { log("lrm", lrm::format_event(e), e.at); });

  adapter_ = std::make_unique<gram::LrmAdapter>(spec_.dialect, *lrm_);
  sandboxes_ = std::make_unique<staging::SandboxStore>(fs_, std::string(kSandboxRoot));
  gram::GatekeeperConfig gk;
  gk.host = spec_.host;
  gk.adapters[spec_.dialect] = adapter_.get();
  if (spec_.jobmanager) gk.adapters[*spec_.jobmanager] = adapter_.get();
  gk.gridmap = gsi::Gridmap::parse(fs_.read(kGridmapPath).value_or(""));
  gk.anchors = gsi::load_trust_anchors(fs_, std::string(kTrustDir));
  gk.max_skew = spec_.max_skew;
  gatekeeper_ = std::make_unique<gram::Gatekeeper>(std::move(gk), *sandboxes_,
                                                   [this](const std::string& line) { log("gatekeeper", line); });
  grid_manager_ = std::make_unique<gridq::GridManager>(
      gridq::GridManagerConfig{spec_.name, spec_.host, "/home", gridq::kMaxFailures}, *lrm_, fs_, transport_, seed_,
      [this](const std::string& line) { log("gridmanager", line); });
}

std::string SiteDaemon::log_path(std::string_view daemon) { return fmt::format("{}/{}.log", kLogDir, daemon); }

void SiteDaemon::log(std::string_view daemon, std::string_view text, std::optional<Timestamp> at) {
  fs_.append(log_path(daemon), fmt::format("{} {}\n", format_iso(at.value_or(now())), text));
}

void SiteDaemon::pump() { lrm_->pump(now()); }

void SiteDaemon::grid_tick() { grid_manager_->tick(now()); }

std::optional<wire::Message> SiteDaemon::handle(const wire::Message& msg, const std::string& from) {
  try {
    if (msg.type == wire::kLrmSubmit) return handle_submit(msg);
    if (msg.type == wire::kLrmQuery) return handle_query(msg);
    if (msg.type == wire::kLrmRemove) return handle_remove(msg);
    if (msg.type == wire::kAdmin) {
      wire::Message reply(wire::kAdmin);
      reply.set("site", spec_.name).set("host", spec_.host);
      reply.payload = announce(spec_);
      return reply;
    }
    if (msg.type == wire::kJobRequest || msg.type == wire::kJobStatus || msg.type == wire::kJobCollect ||
        msg.type == wire::kXferPut || msg.type == wire::kXferGet) {
      if (!spec_.has_role("gatekeeper")) {
        throw Error(Errc::UnknownJobmanager, fmt::format("{} runs no gatekeeper", spec_.host));
      }
      if (msg.type == wire::kJobRequest) log("gatekeeper", fmt::format("JOB-REQUEST from {}", from));
      return gatekeeper_->handle(msg, now());
    }
    throw Error(Errc::FrameError, fmt::format("unknown message type {}", msg.type));
  } catch (const Error& e) {
    return wire::make_error(e.code(), e.detail());
  }
}

wire::Message SiteDaemon::handle_submit(const wire::Message& msg) {
  const auto owner = msg.require("owner");
  const auto iwd = msg.require("iwd");
  const auto sds = jobspec::parse_submit_file(msg.payload);
  const auto at = now();
  std::vector<jobspec::SubmitDescription> vanilla;
  std::string acks;
  for (const auto& sd : sds) {
    if (sd.universe == jobspec::Universe::Vanilla) {
      vanilla.push_back(sd);
      continue;
    }
    for (int i = 0; i < std::max(1, sd.queue_count); ++i) {
      acks += grid_manager_->submit(sd, owner, iwd, at).ack + "\n";
    }
  }
  if (!vanilla.empty()) {
    lrm::SubmitContext ctx;
    ctx.iwd = iwd;
    acks = lrm_->submit(vanilla, owner, at, ctx).ack + "\n" + acks;
  }
  wire::Message reply(wire::kLrmSubmit);
  reply.payload = acks;
  return reply;
}

wire::Message SiteDaemon::handle_query(const wire::Message& msg) {
  const auto what = msg.require("what");
  wire::Message reply(wire::kLrmQuery);
  reply.set("what", what);
  const auto at = now();
  if (what == "status") {
    const auto slots = lrm_->query_status();
    reply.payload = lrm::render_status(slots, at);
  } else if (what == "queue") {
    reply.payload = lrm::render_queue(lrm_->query_queue(at));
  } else if (what == "history") {
    const auto rows = lrm_->query_history();
    reply.payload = lrm::render_history(rows);
  } else {
    throw Error(Errc::Usage, fmt::format("unknown query '{}'", what));
  }
  return reply;
}

wire::Message SiteDaemon::handle_remove(const wire::Message& msg) {
  const auto id = lrm::JobId::parse(msg.require("job-id"));
  const auto* job = lrm_->find(id);
  if (!job) throw Error(Errc::UnknownJob, fmt::format("job {} is not in the queue of {}", id.str(), spec_.host));
  if (msg.get("owner") && job->owner != *msg.get("owner")) {
    throw Error(Errc::NotAuthorized, fmt::format("job {} belongs to {}", id.str(), job->owner));
  }
  lrm_->remove(id, now());
  wire::Message reply(wire::kLrmRemove);
  reply.payload = fmt::format("Job {} marked for removal\n", id.str());
  return reply;
}

}  // namespace minigrid::testbed
