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

#include "minigrid/gram.hpp"

#include <gtest/gtest.h>

#include "minigrid/error.hpp"
#include "minigrid/strings.hpp"
#include "test_support.hpp"

namespace minigrid::gram {
namespace {

const Timestamp kBase = make_time(2013, 2, 13, 13, 0, 0);
const std::string kDn = "/O=Grid/OU=GlobusTest/OU=simpleCA-ca.example.org/OU=example.org/CN=Grid User";

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return Errc::Usage;
}

/// Replies "<program>|<args>|<stdin>" after one second.
class EchoExecutor : public lrm::Executor {
 public:
  std::vector<lrm::ExecRequest> requests;
  lrm::ExecResult execute(const lrm::ExecRequest& req) override {
    requests.push_back(req);
    return {req.program + "|" + strings::join_arguments(req.arguments) + "|" + req.stdin_data, "", 0, seconds(1)};
  }
};

/// Synchronous in-process delivery with a shared clock and per-node skew.
class DirectTransport : public Transport {
 public:
  std::map<std::string, Gatekeeper*> hosts;
  std::vector<lrm::Lrm*> lrms;
  std::map<std::string, Duration> skew;
  Timestamp clock = kBase;
  int calls = 0;

  Timestamp now(const std::string& node) override {
    auto it = skew.find(node);
    return clock + (it == skew.end() ? Duration{0} : it->second);
  }
  wire::Message call(const std::string&, const std::string& to, wire::Message msg, Duration) override {
    ++calls;
    auto it = hosts.find(to);
    if (it == hosts.end()) throw Error(Errc::Timeout, "no route to " + to);
    // Round trip through the frame codec so tests cover the encoding too.
    auto decoded = wire::decode_body(wire::encode_body(msg));
    auto reply = it->second->handle(decoded, now(to));
    if (!reply) throw Error(Errc::Timeout, to + " did not answer");
    return wire::decode_body(wire::encode_body(*reply));
  }
  void post(const std::string& from, const std::string& to, wire::Message msg, ReplyHandler on_reply) override {
    on_reply(call(from, to, std::move(msg), seconds(1)));
  }
  void sleep(const std::string&, Duration dt) override {
    clock += dt;
    for (auto* l : lrms) l->pump(clock);
  }
};

struct Site {
  Site(const NodeFs& fs, const std::string& host, const std::string& dialect, const gsi::Certificate& anchor,
       EchoExecutor& exec)
      : lrm({host, 2, {}, "LINUX", "INTEL", 1001, seconds(4), "/var/lib/" + host, 1}, fs, exec, kBase),
        adapter(dialect, lrm),
        sandboxes(fs, "/var/sandbox/" + host),
        gatekeeper(
            [&] {
              GatekeeperConfig c;
              c.host = host;
              c.adapters["batch"] = &adapter;
              c.adapters[dialect] = &adapter;
              c.gridmap.add(kDn, "gtuser");
              c.anchors = {anchor};
              return c;
            }(),
            sandboxes, [this](const std::string& line) { log.push_back(line); }) {}

  lrm::Lrm lrm;
  LrmAdapter adapter;
  staging::SandboxStore sandboxes;
  Gatekeeper gatekeeper;
  std::vector<std::string> log;
};

struct GramTest : ::testing::Test {
  testing::TempDir dir;
  NodeFs fs{dir.path()};
  NodeFs client_fs{dir.path() / "client"};
  gsi::DeterministicSeed seed{42};
  gsi::CertificateAuthority ca = gsi::CertificateAuthority::init(fs, "/ca", "ca.example.org", kBase - hours(1), seed);
  gsi::IssuedCredential user = ca.issue(kDn, hours(24 * 365), "pw", kBase - hours(1), seed);
  gsi::ProxyCredential proxy = gsi::proxy_init(user.cert, user.key, "pw", kBase, seed);
  EchoExecutor exec;
  Site a{fs, "grid-a.example.org", "condor", ca.root(), exec};
  Site b{fs, "grid-b.example.org", "sgelike", ca.root(), exec};
  DirectTransport transport;
  int counter = 0;
  ClientSession session{transport, "client", client_fs, "/home/gtuser", proxy, seed,
                        [this] { return "client-" + std::to_string(++counter); }};

  void SetUp() override {
    fs.write("/bin/date", "#!minigrid-task date\n");
    transport.hosts = {{"grid-a.example.org", &a.gatekeeper}, {"grid-b.example.org", &b.gatekeeper}};
    transport.lrms = {&a.lrm, &b.lrm};
  }

  static jobspec::ContactString contact(const std::string& host, const std::string& lrm = "batch") {
    return {host, std::nullopt, "jobmanager-" + lrm};
  }

  jobspec::GramJobRequest request(const std::string& id) {
    jobspec::GramJobRequest req;
    req.executable = "/bin/date";
    req.arguments = {"-u"};
    req.owner_dn = kDn;
    req.target_lrm = "batch";
    req.request_id = id;
    return req;
  }

  static bool untouched(const lrm::Lrm& l) { return l.next_cluster() == 1 && !l.find({1, 0}); }
};

TEST(GramStateTest, MappingCoversEveryLrmState) {
  const std::map<lrm::JobState, GramState> expected = {
      {lrm::JobState::Idle, GramState::Pending},     {lrm::JobState::Running, GramState::Active},
      {lrm::JobState::Suspended, GramState::Active}, {lrm::JobState::Completed, GramState::Done},
      {lrm::JobState::Removed, GramState::Failed},   {lrm::JobState::Held, GramState::Failed}};
  ASSERT_EQ(expected.size(), lrm::kAllStates.size());
  for (auto s : lrm::kAllStates) EXPECT_EQ(map_state(s), expected.at(s)) << lrm::state_name(s);
  for (auto g : {GramState::Pending, GramState::Active, GramState::Done, GramState::Failed}) {
    EXPECT_EQ(gram_state_from_string(to_string(g)), g);
  }
  EXPECT_FALSE(gram_state_from_string("RUNNING"));
}

TEST_F(GramTest, JobRunReturnsRemoteOutputAndCleansUp) {
  const auto r = job_run(session, contact("grid-a.example.org"), "/bin/date", {"-u"});
  EXPECT_EQ(r.state, GramState::Done);
  EXPECT_EQ(r.out, "#!minigrid-task date\n|-u|");
  EXPECT_EQ(r.err, "");
  ASSERT_EQ(exec.requests.size(), 1u);
  EXPECT_EQ(exec.requests[0].owner, "gtuser");
  EXPECT_EQ(exec.requests[0].executable, "/bin/date");
  EXPECT_FALSE(a.sandboxes.find("client-1"));
  EXPECT_TRUE(untouched(b.lrm));
}

TEST_F(GramTest, UnknownJobmanagerLeavesLrmUntouched) {
  try {
    job_run(session, contact("grid-a.example.org", "pbs"), "/bin/date", {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnknownJobmanager);
    EXPECT_NE(e.detail().find("pbs"), std::string::npos);
  }
  EXPECT_TRUE(untouched(a.lrm));
}

TEST_F(GramTest, UnmappedIdentityIsNotAuthorized) {
  a.gatekeeper.config().gridmap = gsi::Gridmap{};
  EXPECT_EQ(code_of([&] { job_run(session, contact("grid-a.example.org"), "/bin/date", {}); }),
            Errc::NotAuthorized);
  EXPECT_TRUE(untouched(a.lrm));
}

TEST_F(GramTest, MissingCredentialIsAuthFailure) {
  auto msg = encode_job_request(request("r1"), contact("grid-a.example.org"), {});
  const auto reply = a.gatekeeper.handle(msg, kBase);
  ASSERT_TRUE(reply);
  EXPECT_EQ(reply->get("code"), "AuthFailed");
  EXPECT_TRUE(untouched(a.lrm));
}

TEST_F(GramTest, ClientClockAheadIsFutureCertificate) {
  transport.skew["client"] = seconds(600);
  try {
    job_run(session, contact("grid-a.example.org"), "/bin/date", {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::FutureCertificate);
    EXPECT_NE(e.detail().find("future date/time"), std::string::npos);
  }
  EXPECT_TRUE(untouched(a.lrm));
  transport.skew["client"] = seconds(200);
  EXPECT_NO_THROW(job_run(session, contact("grid-a.example.org"), "/bin/date", {}));
}

TEST_F(GramTest, ExpiredProxyIsRejected) {
  transport.clock = kBase + hours(13);
  EXPECT_EQ(code_of([&] { job_run(session, contact("grid-a.example.org"), "/bin/date", {}); }), Errc::Expired);
  EXPECT_TRUE(untouched(a.lrm));
}

TEST_F(GramTest, KilledAdapterTimesOutNamingContact) {
  a.adapter.set_killed(true);
  try {
    job_run(session, contact("grid-a.example.org"), "/bin/date", {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Timeout);
    EXPECT_NE(e.detail().find("grid-a.example.org/jobmanager-batch"), std::string::npos) << e.detail();
  }
  a.adapter.set_killed(false);
  EXPECT_NO_THROW(job_run(session, contact("grid-a.example.org"), "/bin/date", {}));
}

TEST_F(GramTest, VersionMismatchIsReported) {
  b.adapter.set_version_mismatch(true);
  EXPECT_EQ(code_of([&] { job_run(session, contact("grid-b.example.org"), "/bin/date", {}); }),
            Errc::VersionMismatch);
  EXPECT_TRUE(untouched(b.lrm));
}

TEST_F(GramTest, RepeatedRequestIdIsIdempotent) {
  const auto chain = gsi::delegate(proxy, kBase, seed).chain;
  const auto h1 = a.gatekeeper.handle_request(request("r1"), chain, kBase);
  const auto h2 = a.gatekeeper.handle_request(request("r1"), chain, kBase);
  EXPECT_EQ(h1.remote_job, h2.remote_job);
  EXPECT_EQ(a.lrm.next_cluster(), 2);
}

TEST_F(GramTest, StagedExecutableRunsFromSandbox) {
  client_fs.write("/home/gtuser/myprog", "#!minigrid-task echo\n");
  auto req = request("client-9");
  req.executable = "/home/gtuser/myprog";
  req.stage_in = {{"/home/gtuser/myprog", {}}};
  const auto handle = submit_request(session, contact("grid-a.example.org"), req, seconds(5));
  const auto* job = a.lrm.find(handle.remote_job);
  ASSERT_TRUE(job);
  EXPECT_EQ(job->cmd, "/var/sandbox/grid-a.example.org/client-9/myprog -u");
}

TEST_F(GramTest, CorruptedStageInIsDigestMismatch) {
  auto req = request("r2");
  req.stage_in = {{"/bin/date", staging::digest("#!minigrid-task date\n")}};
  const auto chain = gsi::delegate(proxy, kBase, seed).chain;
  EXPECT_EQ(code_of([&] {
              a.gatekeeper.handle_request(req, chain, kBase, {{"/bin/date", "#!minigrid-task dbte\n"}});
            }),
            Errc::DigestMismatch);
  EXPECT_EQ(code_of([&] { a.gatekeeper.handle_request(req, chain, kBase, {}); }), Errc::MissingSource);
  EXPECT_TRUE(untouched(a.lrm));
}

TEST_F(GramTest, DialectsAreNeutralForIdenticalRequests) {
  const auto ra = job_run(session, contact("grid-a.example.org"), "/bin/date", {"+%s", "two words"});
  const auto rb = job_run(session, contact("grid-b.example.org"), "/bin/date", {"+%s", "two words"});
  EXPECT_EQ(ra.out, rb.out);
  ASSERT_EQ(exec.requests.size(), 2u);
  EXPECT_EQ(exec.requests[0].executable, exec.requests[1].executable);
  EXPECT_EQ(exec.requests[0].arguments, exec.requests[1].arguments);
  EXPECT_EQ(exec.requests[0].owner, exec.requests[1].owner);
  const auto ha = a.lrm.find(ra.handle.remote_job);
  const auto hb = b.lrm.find(rb.handle.remote_job);
  ASSERT_TRUE(ha && hb);
  EXPECT_EQ(ha->cmd, hb->cmd);
}

TEST_F(GramTest, JobRequestEncodingRoundTrips) {
  auto req = request("r7");
  req.arguments = {"a b", "", "c\"d"};
  req.stdin_name = "in.txt";
  req.stage_in = {{"/bin/date", "00ff"}, {"in.txt", "abcd"}};
  const auto chain = gsi::delegate(proxy, kBase, seed).chain;
  const auto msg = wire::decode_body(wire::encode_body(encode_job_request(req, contact("h"), chain)));
  EXPECT_EQ(decode_job_request(msg), req);
  EXPECT_EQ(decode_chain(msg), chain);
}

TEST_F(GramTest, FailedJobsReportFailedWithoutCollect) {
  const auto chain = gsi::delegate(proxy, kBase, seed).chain;
  const auto h = a.gatekeeper.handle_request(request("r3"), chain, kBase);
  a.lrm.hold(h.remote_job, kBase, "test hold");
  EXPECT_EQ(a.gatekeeper.poll_status("r3", kBase), GramState::Failed);
  EXPECT_EQ(code_of([&] { a.gatekeeper.poll_status("nope", kBase); }), Errc::UnknownRequest);
}

}  // namespace
}  // namespace minigrid::gram
