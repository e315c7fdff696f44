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

#include <fstream>
#include <iostream>
#include <sstream>

#include <unistd.h>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <csignal>
#include <random>
#include <thread>

#include "minigrid/cli.hpp"
#include "minigrid/error.hpp"
#include "minigrid/sockets.hpp"
#include "minigrid/testbed.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw minigrid::Error(minigrid::Errc::Usage, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int run_scenario_command(const std::string& config_path, const std::string& script_path, const std::string& run_dir,
                         bool trace) {
  using namespace minigrid::testbed;
  Testbed testbed(parse_testbed_config(slurp(config_path)), run_dir);
  std::cout << run_scenario(testbed, slurp(script_path));
  if (trace) {
    for (const auto& line : testbed.trace()) std::cerr << line << "\n";
  }
  return 0;
}

volatile std::sig_atomic_t g_stop = 0;

int up_command(const std::string& config_path, const std::string& run_dir, int serve_seconds) {
  using namespace minigrid;
  const auto config = testbed::parse_testbed_config(slurp(config_path));
  net::SocketTestbed bed(config, run_dir);
  for (const auto& site : config.sites) std::cout << testbed::announce(site) << "\n";
  std::cout << "registry: " << bed.registry_path().string() << std::endl;
  std::signal(SIGINT, [](int) { g_stop = 1; });
  std::signal(SIGTERM, [](int) { g_stop = 1; });
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(serve_seconds);
  while (!g_stop && (serve_seconds <= 0 || std::chrono::steady_clock::now() < deadline)) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  bed.stop();
  std::cout << "testbed down" << std::endl;
  return 0;
}

int client_command(const std::string& registry_path, const std::string& site, const std::string& user,
                   const std::vector<std::string>& args) {
  using namespace minigrid;
  net::SocketTransport transport(net::Registry::parse(slurp(registry_path)));
  const auto& registry = transport.registry();
  const auto* self = registry.find(site);
  if (!self) throw Error(Errc::UnknownTarget, "no site or host named '" + site + "' in the registry");
  std::string input;
  if (!isatty(fileno(stdin))) {
    std::ostringstream buf;
    buf << std::cin.rdbuf();
    input = buf.str();
  }
  gsi::DeterministicSeed seed(std::random_device{}());
  std::uint64_t counter = 0;
  const auto prefix = fmt::format("{}-{}", self->site, ::getpid());
  std::map<std::string, std::string> env;
  for (const char* key : {"MINIGRID_USER_CRED_DIR", "MINIGRID_TRUST_DIR", "MINIGRID_CA_DIR"}) {
    if (const char* v = std::getenv(key)) env[key] = v;
  }
  cli::Context ctx{transport,
                   self->site,
                   user,
                   [&registry](const std::string& name) {
                     const auto* e = registry.find(name);
                     if (!e) throw Error(Errc::UnknownTarget, "no site named '" + name + "'");
                     return NodeFs(e->root);
                   },
                   [&registry](const std::string& name) {
                     const auto* e = registry.find(name);
                     return e ? e->site : std::string();
                   },
                   "",
                   input,
                   seed,
                   [&] { return fmt::format("{}-{}", prefix, ++counter); },
                   env,
                   nullptr};
  const auto result = cli::run(ctx, args);
  std::cout << result.out;
  std::cerr << result.err;
  return result.status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"minigrid testbed driver"};
  app.require_subcommand(1);

  auto* scenario = app.add_subcommand("scenario", "run a scenario script on the in-process testbed");
  std::string config_path;
  std::string script_path;
  std::string run_dir = "minigrid-run";
  bool trace = false;
  scenario->add_option("script", script_path, "scenario script")->required();
  scenario->add_option("--config", config_path, "testbed config")->required();
  scenario->add_option("--run-dir", run_dir, "directory holding the site file systems");
  scenario->add_flag("--trace", trace, "print every message hop to stderr");

  auto* up = app.add_subcommand("up", "serve every site of a config over loopback sockets");
  int serve_seconds = 0;
  up->add_option("config", config_path, "testbed config")->required();
  up->add_option("--run-dir", run_dir, "directory holding the site file systems and the registry");
  up->add_option("--seconds", serve_seconds, "stop after this many seconds (0 serves until interrupted)");

  auto* client = app.add_subcommand("client", "run one mg-* command against a socket testbed");
  std::string registry_path;
  std::string site;
  std::string user;
  client->add_option("--registry", registry_path, "registry file written by `minigrid up`")->required();
  client->add_option("--site", site, "site the command runs on")->required();
  client->add_option("--user", user, "local user name")->required();
  client->prefix_command();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*scenario) return run_scenario_command(config_path, script_path, run_dir, trace);
    if (*up) return up_command(config_path, run_dir, serve_seconds);
    if (*client) return client_command(registry_path, site, user, client->remaining());
  } catch (const minigrid::Error& e) {
    std::cerr << "minigrid: " << e.what() << "\nhint: " << minigrid::remediation_for(e.code()) << "\n";
    return minigrid::exit_status_for(e.code());
  }
  return 0;
}
