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

#include "minigrid/cli.hpp"

#include <fmt/format.h>

#include "minigrid/error.hpp"
#include "minigrid/gram.hpp"
#include "minigrid/jobspec.hpp"
#include "minigrid/strings.hpp"
#include "minigrid/testbed.hpp"

namespace minigrid::cli {

namespace {

using Args = std::vector<std::string>;

std::string env_or(const Context& ctx, const std::string& key, std::string_view fallback) {
  auto it = ctx.env.find(key);
  return it != ctx.env.end() && !it->second.empty() ? it->second : std::string(fallback);
}

std::string home(const Context& ctx) { return testbed::home_dir(ctx.user); }
std::string cwd(const Context& ctx) { return ctx.cwd.empty() ? home(ctx) : ctx.cwd; }

gsi::CredentialDir cred_dir(const Context& ctx) {
  return {env_or(ctx, "MINIGRID_USER_CRED_DIR", testbed::credential_dir(ctx.user))};
}
std::string trust_dir(const Context& ctx) { return env_or(ctx, "MINIGRID_TRUST_DIR", testbed::kTrustDir); }
std::string ca_dir(const Context& ctx) { return env_or(ctx, "MINIGRID_CA_DIR", testbed::kCaDir); }

NodeFs fs(const Context& ctx) { return ctx.fs_for(ctx.site); }
Timestamp now(Context& ctx) { return ctx.transport.now(ctx.site); }

std::string first_line(std::string_view text) { return std::string(text.substr(0, text.find('\n'))); }

void need(const Args& args, std::size_t min, std::size_t max, std::string_view synopsis) {
  if (args.size() < min || args.size() > max) throw Error(Errc::Usage, fmt::format("usage: {}", synopsis));
}

std::string resolve_site(const Context& ctx, const std::string& name) {
  auto site = ctx.resolve(name);
  if (site.empty()) throw Error(Errc::UnknownTarget, fmt::format("no site or host named '{}'", name));
  return site;
}

/// Request/reply with a site daemon; a silent pool becomes PoolUnreachable.
wire::Message ask(Context& ctx, const std::string& to, wire::Message msg) {
  wire::Message reply;
  try {
    reply = ctx.transport.call(ctx.site, to, std::move(msg), kQueryTimeout);
  } catch (const Error& e) {
    if (e.code() != Errc::Timeout) throw;
    throw Error(Errc::PoolUnreachable, e.detail());
  }
  wire::raise_if_error(reply);
  return reply;
}

wire::Message query(std::string_view what) {
  wire::Message msg(wire::kLrmQuery);
  msg.set("what", std::string(what));
  return msg;
}

// -------------------------------------------------------------------------
// LRM commands

void mg_status(Context& ctx, const Args& args, Result& r) {
  need(args, 0, 1, "mg-status [pool]");
  const auto pool = args.empty() ? ctx.site : args[0];
  r.out = ask(ctx, pool, query("status")).payload;
}

void mg_submit(Context& ctx, const Args& args, Result& r) {
  need(args, 1, 1, "mg-submit <file>");
  const auto path = NodeFs::resolve(cwd(ctx), args[0]);
  const auto text = fs(ctx).read(path);
  if (!text) throw Error(Errc::Usage, fmt::format("cannot open submit file {}", path));
  // Parse on the client too, so syntax errors never reach the daemon.
  jobspec::parse_submit_file(*text);
  wire::Message msg(wire::kLrmSubmit);
  msg.set("owner", ctx.user).set("iwd", cwd(ctx));
  msg.payload = *text;
  r.out = "Submitting job(s).\n" + ask(ctx, ctx.site, std::move(msg)).payload;
}

std::string summary_of(std::string_view view) {
  const auto lines = strings::split_lines(view);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    if (!strings::trim(*it).empty()) return std::string(*it);
  }
  return {};
}

void mg_q(Context& ctx, const Args& args, Result& r) {
  std::optional<long> watch;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--watch" && i + 1 < args.size()) {
      watch = std::strtol(args[++i].c_str(), nullptr, 10);
      if (*watch <= 0) throw Error(Errc::Usage, "--watch needs a positive number of seconds");
    } else {
      throw Error(Errc::Usage, "usage: mg-q [--watch n]");
    }
  }
  if (!watch) {
    r.out = ask(ctx, ctx.site, query("queue")).payload;
    return;
  }
  // Frames whose table did not change since the previous one are not
  // repeated; watching stops once the queue is empty.
  std::string previous;
  for (int frame = 0; frame < kMaxWatchFrames; ++frame) {
    if (frame > 0) ctx.transport.sleep(ctx.site, seconds(*watch));
    const auto view = ask(ctx, ctx.site, query("queue")).payload;
    if (view != previous) {
      r.out += fmt::format("Every {:.1f}s: mg-q {}\n\n{}\n", static_cast<double>(*watch), format_ctime(now(ctx)), view);
      previous = view;
    }
    if (strings::starts_with_icase(summary_of(view), "0 jobs")) break;
  }
}

void mg_history(Context& ctx, const Args& args, Result& r) {
  need(args, 0, 0, "mg-history");
  r.out = ask(ctx, ctx.site, query("history")).payload;
}

void mg_rm(Context& ctx, const Args& args, Result& r) {
  need(args, 1, 1, "mg-rm <cluster.proc>");
  wire::Message msg(wire::kLrmRemove);
  msg.set("job-id", args[0]).set("owner", ctx.user);
  r.out = ask(ctx, ctx.site, std::move(msg)).payload;
}

// -------------------------------------------------------------------------
// Credentials

void mg_proxy_init(Context& ctx, const Args& args, Result& r) {
  bool debug = false;
  bool verify = false;
  Duration lifetime = gsi::kDefaultProxyLifetime;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "-debug") {
      debug = true;
    } else if (args[i] == "-verify") {
      verify = true;
    } else if (args[i] == "-valid" && i + 1 < args.size()) {
      const auto& hm = args[++i];
      const auto colon = hm.find(':');
      if (colon == std::string::npos) throw Error(Errc::Usage, "-valid takes H:M");
      lifetime = hours(std::stol(hm.substr(0, colon))) + std::chrono::minutes(std::stol(hm.substr(colon + 1)));
    } else {
      throw Error(Errc::Usage, "usage: mg-proxy-init [-debug] [-verify] [-valid H:M]");
    }
  }
  const auto node_fs = fs(ctx);
  const auto dir = cred_dir(ctx);
  const auto cert_pem = node_fs.read(dir.cert_path());
  const auto key_pem = node_fs.read(dir.key_path());
  if (!cert_pem || !key_pem) {
    throw Error(Errc::NoProxyFound, fmt::format("no user certificate and key under {}", dir.dir));
  }
  const auto certs = gsi::certificates_from_pem(*cert_pem);
  if (certs.empty()) throw Error(Errc::MalformedCertificate, dir.cert_path() + " holds no certificate");
  const auto& user_cert = certs.front();
  const auto key = gsi::private_key_from_pem(*key_pem);

  if (debug) {
    r.out += fmt::format("User Cert File: {}\nUser Key File: {}\nTrusted CA Cert Dir: {}\nOutput File: {}\n",
                         dir.cert_path(), dir.key_path(), trust_dir(ctx), dir.proxy_path());
  }
  r.out += fmt::format("Your identity: {}\nEnter GRID pass phrase for this identity:\n", user_cert.subject_dn);
  const auto at = now(ctx);
  const auto proxy = gsi::proxy_init(user_cert, key, first_line(ctx.stdin_data), at, ctx.seed, lifetime);
  r.out += "Creating proxy .....+++++++\nDone\n";
  node_fs.write(dir.proxy_path(), gsi::encode_proxy(proxy));
  if (verify) {
    gsi::verify_chain(proxy.chain, gsi::load_trust_anchors(node_fs, trust_dir(ctx)), at, gsi::kDefaultMaxSkew);
    r.out += "Proxy Verify OK\n";
  }
  r.out += fmt::format("Your proxy is valid until: {}\n", format_ctime(proxy.proxy_cert.not_after));
}

void mg_proxy_info(Context& ctx, const Args& args, Result& r) {
  need(args, 0, 0, "mg-proxy-info");
  const auto dir = cred_dir(ctx);
  const auto proxy = gsi::load_proxy(fs(ctx), dir);
  const auto info = gsi::proxy_info(proxy, now(ctx));
  r.out = fmt::format("subject  : {}\nissuer   : {}\nidentity : {}\npath     : {}\ntimeleft : {}{}\n", info.subject,
                      info.issuer, gsi::identity_dn(info.subject), dir.proxy_path(), format_hms(info.time_left),
                      info.expired ? " (expired)" : "");
}

void mg_ca(Context& ctx, const Args& args, Result& r) {
  if (args.empty()) throw Error(Errc::Usage, "usage: mg-ca init [name] | mg-ca sign <user> <dn>");
  const auto node_fs = fs(ctx);
  const auto at = now(ctx);
  if (args[0] == "init") {
    need(args, 1, 2, "mg-ca init [name]");
    const auto name = args.size() > 1 ? args[1] : "simpleCA-" + ctx.site;
    const auto ca = gsi::CertificateAuthority::init(node_fs, ca_dir(ctx), name, at, ctx.seed);
    r.out = fmt::format("CA initialized in {}\nsubject: {}\nvalid until: {}\n", ca_dir(ctx), ca.root().subject_dn,
                        format_ctime(ca.root().not_after));
  } else if (args[0] == "sign") {
    need(args, 3, 3, "mg-ca sign <user> <dn>");
    const auto ca = gsi::CertificateAuthority::load(node_fs, ca_dir(ctx));
    const auto cred = ca.issue(args[2], hours(24 * 365), first_line(ctx.stdin_data), at, ctx.seed);
    const gsi::CredentialDir dir{testbed::credential_dir(args[1])};
    node_fs.write(dir.cert_path(), gsi::certificate_to_pem(cred.cert));
    node_fs.write(dir.key_path(), gsi::private_key_to_pem(cred.key));
    r.out = fmt::format("issued {}\ncertificate: {}\nvalid until: {}\n", cred.cert.subject_dn, dir.cert_path(),
                        format_ctime(cred.cert.not_after));
  } else {
    throw Error(Errc::Usage, "usage: mg-ca init [name] | mg-ca sign <user> <dn>");
  }
}

// -------------------------------------------------------------------------
// Remote execution

void mg_job_run(Context& ctx, const Args& args, Result& r) {
  if (args.size() < 2) throw Error(Errc::Usage, "usage: mg-job-run <contact> <executable> [args...]");
  const auto contact = jobspec::parse_contact_string(args[0]);
  gram::ClientSession session{ctx.transport,    ctx.site, fs(ctx), cwd(ctx), gsi::load_proxy(fs(ctx), cred_dir(ctx)),
                              ctx.seed,         ctx.next_request_id};
  const std::vector<std::string> job_args(args.begin() + 2, args.end());
  const auto result = gram::job_run(session, contact, args[1], job_args);
  r.out = result.out;
  r.err = result.err;
  r.status = result.exit_code;
  if (result.state == gram::GramState::Failed && r.status == 0) r.status = 4;
}

// -------------------------------------------------------------------------
// Administration

testbed::Testbed& require_testbed(Context& ctx) {
  if (!ctx.testbed) throw Error(Errc::Usage, "this command needs the in-process testbed");
  return *ctx.testbed;
}

void mg_testbed(Context& ctx, const Args& args, Result& r) {
  constexpr std::string_view synopsis =
      "mg-testbed up <config> | down | faults | fault <kind> <target> [skew] | fault clear <kind> <target>";
  if (args.empty()) throw Error(Errc::Usage, fmt::format("usage: {}", synopsis));
  const auto& verb = args[0];
  if (verb == "up") {
    need(args, 2, 2, "mg-testbed up <config>");
    const auto path = NodeFs::resolve(cwd(ctx), args[1]);
    const auto text = fs(ctx).read(path);
    if (!text) throw Error(Errc::Usage, fmt::format("cannot open config {}", path));
    const auto config = testbed::parse_testbed_config(*text);
    testbed::validate(config);
    for (const auto& site : config.sites) r.out += testbed::announce(site) + "\n";
    return;
  }
  auto& tb = require_testbed(ctx);
  if (verb == "down") {
    need(args, 1, 1, "mg-testbed down");
    tb.clear_all_faults();
    for (const auto& name : tb.site_names()) r.out += fmt::format("site {} down\n", name);
  } else if (verb == "faults") {
    need(args, 1, 1, "mg-testbed faults");
    for (const auto& f : tb.active_faults()) r.out += fmt::format("{} {}\n", testbed::to_string(f.kind), f.target);
  } else if (verb == "fault" && args.size() >= 2 && args[1] == "clear") {
    need(args, 4, 4, "mg-testbed fault clear <kind> <target>");
    const auto kind = testbed::fault_from_string(args[2]);
    if (!kind) throw Error(Errc::Usage, fmt::format("unknown fault kind '{}'", args[2]));
    if (!tb.clear_fault(*kind, args[3])) {
      throw Error(Errc::Usage, fmt::format("no active {} fault on {}", args[2], args[3]));
    }
    r.out = fmt::format("fault {} cleared on {}\n", args[2], args[3]);
  } else if (verb == "fault") {
    need(args, 3, 4, "mg-testbed fault <kind> <target> [skew]");
    const auto kind = testbed::fault_from_string(args[1]);
    if (!kind) throw Error(Errc::Usage, fmt::format("unknown fault kind '{}'", args[1]));
    testbed::FaultSpec spec;
    spec.kind = *kind;
    spec.target = args[2];
    if (args.size() == 4) {
      if (*kind != testbed::FaultKind::ClockSkew) throw Error(Errc::Usage, "only clock_skew takes a skew");
      std::string_view s = args[3];
      if (!s.empty() && s.front() == '+') s.remove_prefix(1);
      spec.skew = seconds(std::stoll(std::string(s)));
    }
    tb.inject_fault(spec);
    r.out = fmt::format("fault {} active on {}\n", args[1], args[2]);
  } else {
    throw Error(Errc::Usage, fmt::format("usage: {}", synopsis));
  }
}

using Handler = void (*)(Context&, const Args&, Result&);

const std::map<std::string, Handler, std::less<>>& handlers() {
  static const std::map<std::string, Handler, std::less<>> table = {
      {"mg-ca", mg_ca},
      {"mg-history", mg_history},
      {"mg-job-run", mg_job_run},
      {"mg-proxy-info", mg_proxy_info},
      {"mg-proxy-init", mg_proxy_init},
      {"mg-q", mg_q},
      {"mg-rm", mg_rm},
      {"mg-status", mg_status},
      {"mg-submit", mg_submit},
      {"mg-testbed", mg_testbed},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, _] : handlers()) out.push_back(name);
    return out;
  }();
  return names;
}

Context testbed_context(testbed::Testbed& testbed, const std::string& user, const std::string& site,
                        std::string stdin_data) {
  auto* tb = &testbed;
  return Context{tb->transport(),
                 tb->site(site).spec().name,
                 user,
                 [tb](const std::string& name) { return tb->fs(name); },
                 [tb](const std::string& name) {
                   try {
                     return tb->site(name).spec().name;
                   } catch (const Error&) {
                     return std::string();
                   }
                 },
                 "",
                 std::move(stdin_data),
                 tb->client_seed(),
                 [tb] { return tb->next_request_id(); },
                 {},
                 tb};
}

Result run(Context& ctx, const std::vector<std::string>& args) {
  Result r;
  const auto command = args.empty() ? std::string("mg") : args[0];
  try {
    auto it = handlers().find(command);
    if (it == handlers().end()) throw Error(Errc::Usage, fmt::format("unknown command '{}'", command));
    // --site and --as-user apply to every command and are consumed here.
    Context local = ctx;
    Args rest;
    for (std::size_t i = 1; i < args.size(); ++i) {
      if ((args[i] == "--site" || args[i] == "--as-user") && i + 1 < args.size()) {
        if (args[i] == "--site") {
          local.site = resolve_site(ctx, args[++i]);
        } else {
          local.user = args[++i];
        }
        if (ctx.cwd.empty() || local.user != ctx.user) local.cwd.clear();
      } else {
        rest.push_back(args[i]);
      }
    }
    it->second(local, rest, r);
  } catch (const Error& e) {
    r.err += fmt::format("{}: {}: {}\nhint: {}\n", command, to_string(e.code()), e.detail(),
                         remediation_for(e.code()));
    r.status = exit_status_for(e.code());
  } catch (const std::exception& e) {
    r.err += fmt::format("{}: Usage: {}\nhint: {}\n", command, e.what(), remediation_for(Errc::Usage));
    r.status = 2;
  }
  return r;
}

}  // namespace minigrid::cli
