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

#include "minigrid/gridq.hpp"

#include <random>

#include <gtest/gtest.h>

#include "minigrid/error.hpp"
#include "minigrid/strings.hpp"
#include "test_support.hpp"

namespace minigrid::gridq {
namespace {

const Timestamp kBase = make_time(2013, 2, 13, 13, 0, 0);
const std::string kDn = "/O=Grid/OU=GlobusTest/OU=simpleCA-ca.example.org/OU=example.org/CN=Grid User";
const std::string kRemote = "grid-b.example.org";

class EchoExecutor : public lrm::Executor {
 public:
  lrm::ExecResult execute(const lrm::ExecRequest& req) override {
    return {"ran " + strings::join_arguments(req.arguments) + "\n", "", 0, seconds(3)};
  }
};

/// Synchronous delivery with switches to drop or corrupt traffic.
class FaultyTransport : public Transport {
 public:
  gram::Gatekeeper* remote = nullptr;
  Timestamp clock = kBase;
  bool drop = false;
  bool corrupt_puts = false;
  bool corrupt_gets = false;

  Timestamp now(const std::string&) override { return clock; }
  wire::Message call(const std::string&, const std::string&, wire::Message, Duration) override {
    throw Error(Errc::Usage, "not used");
  }
  void post(const std::string&, const std::string& to, wire::Message msg, ReplyHandler on_reply) override {
    if (drop || to != kRemote) return;
    if (corrupt_puts && msg.type == wire::kXferPut && !msg.payload.empty()) msg.payload[0] ^= 0x01;
    auto reply = remote->handle(msg, clock);
    if (!reply) return;
    if (corrupt_gets && reply->type == wire::kXferGet && !reply->payload.empty()) reply->payload[0] ^= 0x01;
    on_reply(*reply);
  }
  void sleep(const std::string&, Duration dt) override { clock += dt; }
};

struct GridqTest : ::testing::Test {
  testing::TempDir dir;
  NodeFs local_fs{dir.path() / "a"};
  NodeFs remote_fs{dir.path() / "b"};
  gsi::DeterministicSeed seed{7};
  gsi::CertificateAuthority ca = gsi::CertificateAuthority::init(remote_fs, "/ca", "ca", kBase - hours(1), seed);
  gsi::IssuedCredential user = ca.issue(kDn, hours(24 * 365), "pw", kBase - hours(1), seed);
  EchoExecutor exec;
  lrm::Lrm local{{"grid-a.example.org", 2, {}, "LINUX", "INTEL", 1001, seconds(4), "/var/lib/minigrid", 1},
                 local_fs, exec, kBase};
  lrm::Lrm remote_lrm{{kRemote, 2, {}, "LINUX", "INTEL", 1001, seconds(4), "/var/lib/minigrid", 1},
                      remote_fs, exec, kBase};
  gram::LrmAdapter adapter{"sgelike", remote_lrm};
  staging::SandboxStore sandboxes{remote_fs, "/var/lib/minigrid/sandbox"};
  gram::Gatekeeper gatekeeper{[&] {
                                gram::GatekeeperConfig c;
                                c.host = kRemote;
                                c.adapters["sgelike"] = &adapter;
                                c.gridmap.add(kDn, "gtuser");
                                c.anchors = {ca.root()};
                                return c;
                              }(),
                              sandboxes, [](const std::string&) {}};
  FaultyTransport transport;
  std::vector<std::string> log;
  GridManager manager{{"a", "grid-a.example.org", "/home", kMaxFailures}, local, local_fs, transport, seed,
                      [this](const std::string& line) { log.push_back(line); }};
  std::vector<lrm::LrmEvent> events;

  void SetUp() override {
    transport.remote = &gatekeeper;
    local_fs.write("/bin/hostname", "#!minigrid-task hostname\n");
    local.set_observer([this](const lrm::LrmEvent& e) { events.push_back(e); });
  }

  void install_proxy() {
    const auto proxy = gsi::proxy_init(user.cert, user.key, "pw", transport.clock, seed);
    local_fs.write("/home/gtuser/.globus/proxy.pem", gsi::encode_proxy(proxy));
  }

  jobspec::SubmitDescription grid_sd() {
    return jobspec::parse_submit_file(
               "universe = globus\n"
               "grid_resource = gt5 grid-b.example.org/jobmanager-sgelike\n"
               "executable = /bin/hostname\n"
               "arguments = -f\n"
               "output = result.output\n"
               "error = result.error\n"
               "log = result.log\n"
               "queue\n")
        .front();
  }

  /// One scheduler interval: remote LRM pump, then the grid manager tick.
  void step() {
    transport.clock += kTickInterval;
    remote_lrm.pump(transport.clock);
    manager.tick(transport.clock);
    local.pump(transport.clock);
  }

  lrm::JobState local_state(lrm::JobId id) {
    if (const auto* job = local.find(id)) return job->state;
    return local.find_history(id)->state;
  }
};

TEST(MirrorTargetTest, EveryRemoteStateHasATarget) {
  EXPECT_EQ(mirror_target(gram::GramState::Pending), lrm::JobState::Idle);
  EXPECT_EQ(mirror_target(gram::GramState::Active), lrm::JobState::Running);
  EXPECT_EQ(mirror_target(gram::GramState::Done), lrm::JobState::Running);
  EXPECT_EQ(mirror_target(gram::GramState::Failed), lrm::JobState::Held);
  // Composed with the gatekeeper mapping, no local target is ever terminal:
  // completion only comes from collection.
  for (auto s : lrm::kAllStates) EXPECT_FALSE(lrm::is_terminal(mirror_target(gram::map_state(s))));
}

TEST_F(GridqTest, GridJobRunsRemotelyAndOutputComesHome) {
  install_proxy();
  const auto r = manager.submit(grid_sd(), "gtuser", "/home/gtuser", transport.clock);
  EXPECT_EQ(r.ack, "1 job(s) submitted to cluster 1.");
  EXPECT_EQ(local.find(r.first)->cmd, "/bin/hostname -f");
  for (int i = 0; i < 20 && local.find(r.first); ++i) step();

  EXPECT_FALSE(local.find(r.first)) << "record should retire after linger";
  const auto row = local.find_history(r.first);
  ASSERT_TRUE(row);
  EXPECT_EQ(row->state, lrm::JobState::Completed);
  EXPECT_EQ(row->run_time, seconds(3));
  EXPECT_EQ(local_fs.read("/home/gtuser/result.output"), "ran -f\n");
  EXPECT_EQ(local_fs.read("/home/gtuser/result.error"), "");

  // Remote side ran it from the sandbox and cleaned up.
  const auto remote_rows = remote_lrm.query_history();
  ASSERT_EQ(remote_rows.size(), 1u);
  EXPECT_EQ(remote_rows[0].owner, "gtuser");
  EXPECT_NE(remote_rows[0].cmd.find("/sandbox/grid-a.example.org-1.0/hostname"), std::string::npos);
  EXPECT_FALSE(sandboxes.find("grid-a.example.org-1.0"));

  // Local transitions are single legal steps, one per tick at most.
  std::vector<lrm::JobState> seen;
  for (const auto& e : events) {
    if (e.from) EXPECT_TRUE(lrm::is_legal_transition(*e.from, e.to));
    seen.push_back(e.to);
  }
  EXPECT_EQ(seen, (std::vector{lrm::JobState::Idle, lrm::JobState::Running, lrm::JobState::Completed}));
  for (std::size_t i = 1; i + 1 < events.size(); ++i) EXPECT_LT(events[i].at, events[i + 1].at);

  const auto user_log = local_fs.read("/home/gtuser/result.log");
  ASSERT_TRUE(user_log);
  EXPECT_NE(user_log->find("000 (1.0)"), std::string::npos);
  EXPECT_NE(user_log->find("001 (1.0)"), std::string::npos);
  EXPECT_NE(user_log->find("005 (1.0)"), std::string::npos);
}

TEST_F(GridqTest, MissingProxyHoldsImmediately) {
  const auto r = manager.submit(grid_sd(), "gtuser", "/home/gtuser", transport.clock);
  const auto* job = local.find(r.first);
  ASSERT_TRUE(job);
  EXPECT_EQ(job->state, lrm::JobState::Held);
  EXPECT_NE(job->hold_reason.find("mg-proxy-init"), std::string::npos) << job->hold_reason;
  step();
  EXPECT_EQ(remote_lrm.next_cluster(), 1);
}

TEST_F(GridqTest, RemoteRejectionHoldsWithCode) {
  install_proxy();
  gatekeeper.config().gridmap = gsi::Gridmap{};
  const auto r = manager.submit(grid_sd(), "gtuser", "/home/gtuser", transport.clock);
  step();
  const auto* job = local.find(r.first);
  EXPECT_EQ(job->state, lrm::JobState::Held);
  EXPECT_EQ(job->hold_reason.rfind("NotAuthorized", 0), 0u) << job->hold_reason;
}

TEST_F(GridqTest, CorruptedStageInHoldsWithDigestMismatch) {
  install_proxy();
  transport.corrupt_puts = true;
  const auto r = manager.submit(grid_sd(), "gtuser", "/home/gtuser", transport.clock);
  step();
  const auto* job = local.find(r.first);
  EXPECT_EQ(job->state, lrm::JobState::Held);
  EXPECT_EQ(job->hold_reason.rfind("DigestMismatch", 0), 0u) << job->hold_reason;
  EXPECT_EQ(remote_lrm.next_cluster(), 1);
}

TEST_F(GridqTest, CorruptedOutputIsNeverDelivered) {
  install_proxy();
  transport.corrupt_gets = true;
  const auto r = manager.submit(grid_sd(), "gtuser", "/home/gtuser", transport.clock);
  for (int i = 0; i < 10; ++i) step();
  const auto* job = local.find(r.first);
  ASSERT_TRUE(job);
  EXPECT_EQ(job->state, lrm::JobState::Held);
  EXPECT_EQ(job->hold_reason.rfind("DigestMismatch", 0), 0u) << job->hold_reason;
  EXPECT_FALSE(local_fs.exists("/home/gtuser/result.output"));
}

TEST_F(GridqTest, PropertyHoldsExactlyAfterConsecutiveSilence) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    // Fresh remote per trial is unnecessary: the remote job never starts.
    lrm::Lrm idle_remote{{kRemote, 0, {}, "LINUX", "INTEL", 1001, seconds(4), "/var/lib/t" + std::to_string(trial), 1},
                         remote_fs, exec, kBase};
    gram::LrmAdapter idle_adapter{"sgelike", idle_remote};
    gatekeeper.config().adapters["sgelike"] = &idle_adapter;
    install_proxy();
    const auto r = manager.submit(grid_sd(), "gtuser", "/home/gtuser", transport.clock);

    // Drop pattern, one decision per tick; dropping is more likely than not
    // so that runs of five actually occur.
    std::vector<bool> dropped;
    for (int k = 0; k < 40; ++k) dropped.push_back(rng() % 10 < 7);

    // Oracle: the exchange at tick k is judged at tick k+1. The hold
    // happens at the first tick preceded by five dropped exchanges in a row.
    int expected_hold = -1;
    int run = 0;
    for (int k = 0; k < static_cast<int>(dropped.size()); ++k) {
      if (k > 0) {
        run = dropped[k - 1] ? run + 1 : 0;
        if (run >= kMaxFailures) {
          expected_hold = k;
          break;
        }
      }
    }

    int actual_hold = -1;
    for (int k = 0; k < static_cast<int>(dropped.size()); ++k) {
      transport.drop = dropped[k];
      transport.clock += kTickInterval;
      manager.tick(transport.clock);
      if (local.find(r.first)->state == lrm::JobState::Held) {
        actual_hold = k;
        break;
      }
    }
    transport.drop = false;
    EXPECT_EQ(actual_hold, expected_hold) << "trial " << trial;
    if (actual_hold >= 0) {
      EXPECT_NE(local.find(r.first)->hold_reason.find("remote contact lost"), std::string::npos);
    } else {
      local.remove(r.first, transport.clock);
    }
    gatekeeper.config().adapters["sgelike"] = &adapter;
  }
}

}  // namespace
}  // namespace minigrid::gridq
