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

// Acceptance suite. Prints one PASS or FAIL line per criterion and exits
// nonzero when any criterion fails. Every check runs on the deterministic
// in-process testbed.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "../support/testbed_helpers.hpp"
#include "minigrid/error.hpp"
#include "minigrid/gram.hpp"
#include "minigrid/gsi.hpp"
#include "minigrid/jobspec.hpp"
#include "minigrid/lrm.hpp"
#include "minigrid/strings.hpp"
#include "minigrid/testbed.hpp"

namespace minigrid::acceptance {
namespace {

using test::read_file;
using test::scenario_config;
using test::scratch_dir;
using test::source_file;

/// Thrown by check() to fail the current criterion with a reason.
struct Failure {
  std::string reason;
};

void check(bool ok, const std::string& reason) {
  if (!ok) throw Failure{reason};
}

/// Every run directory produced by the suite, replayed by criterion 7.
std::vector<std::filesystem::path>& run_dirs() {
  static std::vector<std::filesystem::path> dirs;
  return dirs;
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = scratch_dir("acceptance-" + name);
  run_dirs().push_back(dir);
  return dir;
}

// ---------------------------------------------------------------------------
// Transcript helpers

struct Block {
  std::string prompt;  // "user@site"
  std::string command;
  std::string output;
};

/// Splits a scenario transcript at its prompt lines.
std::vector<Block> split_transcript(const std::string& transcript) {
  static const std::regex prompt(R"(^([A-Za-z0-9_.-]+@[A-Za-z0-9_.-]+):~\$ (.*)$)");
  std::vector<Block> blocks;
  for (const auto& line : strings::split_lines(transcript)) {
    std::smatch m;
    if (std::regex_match(line, m, prompt)) {
      blocks.push_back({m[1].str(), m[2].str(), ""});
    } else if (!blocks.empty()) {
      blocks.back().output += line + "\n";
    }
  }
  return blocks;
}

std::vector<const Block*> blocks_for(const std::vector<Block>& blocks, const std::string& prefix) {
  std::vector<const Block*> out;
  for (const auto& b : blocks) {
    if (b.command.rfind(prefix, 0) == 0) out.push_back(&b);
  }
  return out;
}

std::string total_line(const std::string& status) {
  for (const auto& line : strings::split_lines(status)) {
    const auto f = strings::split_ws(line);
    if (!f.empty() && f[0] == "Total" && f.size() == 8) return line;
  }
  return {};
}

/// History data rows (the header is skipped).
std::vector<std::vector<std::string>> history_rows(const std::string& history) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& line : strings::split_lines(history)) {
    auto f = strings::split_ws(line);
    if (f.empty() || f[0] == "ID" || line.rfind("[exit", 0) == 0) continue;
    rows.push_back(std::move(f));
  }
  return rows;
}

std::string run_script(const std::string& script, const std::string& config, const std::string& tag) {
  testbed::Testbed tb(scenario_config(config), fresh_dir(tag));
  return testbed::run_scenario(tb, source_file("scenarios/" + script));
}

const std::regex& date_line() {
  static const std::regex re(
      R"(^(Sun|Mon|Tue|Wed|Thu|Fri|Sat) (Jan|Feb|Mar|Apr|May|Jun|Jul|Aug|Sep|Oct|Nov|Dec) [ 0-9][0-9] )"
      R"([0-9]{2}:[0-9]{2}:[0-9]{2} [A-Z]+ [0-9]{4}\n$)");
  return re;
}

// ---------------------------------------------------------------------------
// 1. Local batch round trip

void local_submit() {
  testbed::Testbed tb(scenario_config("single-site.cfg"), fresh_dir("local-submit"));
  const auto blocks = split_transcript(testbed::run_scenario(tb, source_file("scenarios/local-submit.scn")));

  const auto submits = blocks_for(blocks, "mg-submit");
  check(submits.size() == 1, "expected one mg-submit");
  check(submits[0]->output == "Submitting job(s).\n1 job(s) submitted to cluster 1.\n",
        "ack was: " + submits[0]->output);

  const auto hist = blocks_for(blocks, "mg-history");
  check(hist.size() == 1, "expected one mg-history");
  const auto rows = history_rows(hist[0]->output);
  check(rows.size() == 1 && rows[0].size() >= 8, "history: " + hist[0]->output);
  check(rows[0][0] == "1.0" && rows[0][5] == "C", "history row: " + hist[0]->output);

  const auto out = read_file(tb.run_dir() / "grid-b/home/grid-b/result.out");
  const auto host = tb.site("grid-b").spec().host;
  check(!out.empty() && host.rfind(strings::trim(out), 0) == 0, "result.out was '" + out + "'");

  const auto status = blocks_for(blocks, "mg-status");
  check(status.size() == 3, "expected three mg-status runs");
  const auto fresh = total_line(status.front()->output);
  const auto busy = total_line(status[1]->output);
  const auto final = total_line(status.back()->output);
  check(!fresh.empty() && fresh == final, "totals differ: '" + fresh + "' vs '" + final + "'");
  check(busy != fresh, "the busy snapshot shows no claimed slot");
  check(strings::split_ws(final)[4] == "2", "Unclaimed is not 2: " + final);
}

// ---------------------------------------------------------------------------
// 2. Remote run

/// Checks one successful mg-job-run of /bin/date from grid-b against ca and
/// that ca's history grew by exactly one /bin/date row.
void remote_date_succeeds(testbed::Testbed& tb) {
  const auto before = history_rows(test::run(tb, "ca", "ca", {"mg-history"}).out);
  const auto r = test::run(tb, "gtuser", "grid-b", {"mg-job-run", "ca.it2.ddu.ac.in/jobmanager-condor", "/bin/date"});
  check(r.status == 0, fmt::format("mg-job-run exit {}: {}", r.status, r.err));
  check(std::regex_match(r.out, date_line()), "not a single date line: '" + r.out + "'");
  tb.advance(seconds(20));
  const auto after = history_rows(test::run(tb, "ca", "ca", {"mg-history"}).out);
  check(after.size() == before.size() + 1,
        fmt::format("ca history grew by {} rows", static_cast<long>(after.size()) - static_cast<long>(before.size())));
  std::set<std::string> old_ids;
  for (const auto& row : before) old_ids.insert(row[0]);
  for (const auto& row : after) {
    if (old_ids.count(row[0])) continue;
    check(row.back() == "/bin/date", "new history row CMD is " + row.back());
  }
}

void globus_job_run() {
  testbed::Testbed tb(scenario_config("three-site.cfg"), fresh_dir("globus-job-run"));
  const auto blocks = split_transcript(testbed::run_scenario(tb, source_file("scenarios/globus-job-run.scn")));

  const auto runs = blocks_for(blocks, "mg-job-run");
  check(runs.size() == 1, "expected one mg-job-run");
  check(std::regex_match(runs[0]->output, date_line()), "caller output: '" + runs[0]->output + "'");

  const auto hist = blocks_for(blocks, "mg-history");
  check(hist.size() == 1 && hist[0]->prompt == "ca@ca", "expected one mg-history on ca");
  const auto rows = history_rows(hist[0]->output);
  check(rows.size() == 1, "ca history rows: " + hist[0]->output);
  check(rows[0].back() == "/bin/date", "ca history CMD: " + rows[0].back());

  const auto proxy =
      gsi::decode_proxy(read_file(tb.run_dir() / "grid-b/home/gtuser/.globus/proxy.pem"));
  const auto validity = proxy.proxy_cert.not_after - proxy.proxy_cert.not_before;
  check(std::chrono::abs(validity - hours(12)) <= seconds(1),
        fmt::format("proxy validity {} ms", validity.count()));

  remote_date_succeeds(tb);
}

// ---------------------------------------------------------------------------
// 3. Grid-universe lifecycle

void grid_universe() {
  testbed::Testbed tb(scenario_config("three-site.cfg"), fresh_dir("grid-universe"));
  const auto blocks = split_transcript(testbed::run_scenario(tb, source_file("scenarios/grid-universe.scn")));
  const auto watch = blocks_for(blocks, "mg-q --watch 2");
  check(watch.size() == 1, "expected one mg-q --watch 2");

  std::vector<std::string> summaries;
  static const std::regex summary(R"(^[0-9]+ jobs; .*$)");
  for (const auto& line : strings::split_lines(watch[0]->output)) {
    if (!std::regex_match(line, summary)) continue;
    if (summaries.empty() || summaries.back() != line) summaries.push_back(line);
  }
  const std::vector<std::string> expected = {
      "1 jobs; 0 completed, 0 removed, 1 idle, 0 running, 0 held, 0 suspended",
      "1 jobs; 0 completed, 0 removed, 0 idle, 1 running, 0 held, 0 suspended",
      "1 jobs; 1 completed, 0 removed, 0 idle, 0 running, 0 held, 0 suspended",
      "0 jobs; 0 completed, 0 removed, 0 idle, 0 running, 0 held, 0 suspended",
  };
  std::string got;
  for (const auto& s : summaries) got += "\n  " + s;
  check(summaries == expected, "summary sequence:" + got);

  static const std::regex header(R"(^Every 2\.0s: mg-q .*$)");
  int frames = 0;
  for (const auto& line : strings::split_lines(watch[0]->output)) frames += std::regex_match(line, header) ? 1 : 0;
  check(frames >= 4, fmt::format("only {} frames", frames));
}

// ---------------------------------------------------------------------------
// 4. Adapter neutrality

void neutrality() {
  const auto config = scenario_config("neutral.cfg");
  std::map<std::string, std::string> dialects;
  for (const auto& s : config.sites) dialects[s.name] = s.dialect;
  check(dialects["ca"] != dialects["grid-v"], "both targets use the same dialect");

  testbed::Testbed tb(config, fresh_dir("neutrality"));
  const auto init = test::run(tb, "gtuser", "grid-b", {"mg-proxy-init"}, "globus\n");
  check(init.status == 0, "mg-proxy-init failed: " + init.err);

  const auto fs = tb.fs("grid-b");
  gram::ClientSession session{tb.transport(),
                              "grid-b",
                              fs,
                              testbed::home_dir("gtuser"),
                              gsi::load_proxy(fs, {testbed::credential_dir("gtuser")}),
                              tb.client_seed(),
                              [&tb] { return tb.next_request_id(); }};
  const std::vector<std::string> args = {"same", "bytes"};
  std::vector<gram::JobRunResult> results;
  for (const auto* contact : {"ca.it2.ddu.ac.in/jobmanager-batch", "grid-v.it2.ddu.ac.in/jobmanager-batch"}) {
    results.push_back(gram::job_run(session, jobspec::parse_contact_string(contact), "/bin/echo", args));
    check(results.back().state == gram::GramState::Done, fmt::format("{} did not reach DONE", contact));
  }
  check(!results[0].out.empty(), "empty stdout");
  check(results[0].out == results[1].out,
        "stdout differs: '" + results[0].out + "' vs '" + results[1].out + "'");
  check(results[0].err == results[1].err, "stderr differs");
}

// ---------------------------------------------------------------------------
// 5. Fault taxonomy

/// The code named in "mg-job-run: <Code>: ...".
std::string reported_code(const cli::Result& r) {
  static const std::regex re(R"(^mg-job-run: ([A-Za-z]+): )");
  std::smatch m;
  if (std::regex_search(r.err, m, re)) return m[1].str();
  return {};
}

void fault_taxonomy() {
  testbed::Testbed tb(scenario_config("three-site.cfg"), fresh_dir("faults"));
  const auto init = test::run(tb, "gtuser", "grid-b", {"mg-proxy-init"}, "globus\n");
  check(init.status == 0, "mg-proxy-init failed: " + init.err);
  tb.advance(seconds(1));

  struct Case {
    testbed::FaultKind kind;
    std::string target;
    Duration skew;
    std::string code;
    std::string phrase;  // must appear in stderr
  };
  const std::vector<Case> cases = {
      {testbed::FaultKind::ClockSkew, "grid-b", seconds(300), "FutureCertificate",
       "certificate with future date/time"},
      {testbed::FaultKind::DropProxy, "grid-b", Duration{0}, "NoProxyFound", "mg-proxy-init"},
      {testbed::FaultKind::AdapterVersionMismatch, "ca", Duration{0}, "VersionMismatch", ""},
      {testbed::FaultKind::KillAdapter, "ca", Duration{0}, "Timeout", ""},
      {testbed::FaultKind::Partition, "ca", Duration{0}, "Timeout", ""},
  };
  for (const auto& c : cases) {
    const auto name = std::string(testbed::to_string(c.kind));
    tb.inject_fault({c.kind, c.target, c.skew, std::nullopt, std::nullopt});
    const auto r =
        test::run(tb, "gtuser", "grid-b", {"mg-job-run", "ca.it2.ddu.ac.in/jobmanager-condor", "/bin/date"});
    check(r.status != 0, name + ": the run succeeded");
    check(reported_code(r) == c.code, name + ": reported '" + reported_code(r) + "', stderr: " + r.err);
    check(c.phrase.empty() || r.err.find(c.phrase) != std::string::npos, name + ": stderr lacks '" + c.phrase + "'");
    check(tb.clear_fault(c.kind, c.target), name + ": nothing to clear");
    tb.advance(seconds(30));
    try {
      remote_date_succeeds(tb);
    } catch (const Failure& f) {
      throw Failure{name + " cleared: " + f.reason};
    }
  }

  // Only staged transfers carry digests, so the corruption surfaces as the
  // hold reason of a grid-universe job.
  const std::string submit =
      "Universe = Globus\n"
      "grid_resource = gt5 grid-v.it2.ddu.ac.in/jobmanager-condor\n"
      "Executable = /bin/hostname\n"
      "Output = corrupt.output\n"
      "Error = corrupt.error\n"
      "Log = corrupt.log\n"
      "Queue\n";
  tb.fs("grid-b").write("/home/gtuser/corrupt.submit", submit);
  tb.inject_fault({testbed::FaultKind::CorruptTransfer, "grid-v", Duration{0}, std::nullopt, std::nullopt});
  const auto sub = test::run(tb, "gtuser", "grid-b", {"mg-submit", "corrupt.submit"});
  check(sub.status == 0, "corrupt_transfer: submit failed: " + sub.err);
  static const std::regex cluster(R"(submitted to cluster ([0-9]+)\.)");
  std::smatch m;
  check(std::regex_search(sub.out, m, cluster), "corrupt_transfer: no ack");
  const lrm::JobId id{std::stoi(m[1].str()), 0};
  tb.advance(seconds(30));
  const auto* job = tb.site("grid-b").lrm().find(id);
  check(job && job->state == lrm::JobState::Held, "corrupt_transfer: job is not held");
  check(job->hold_reason.rfind("DigestMismatch:", 0) == 0, "corrupt_transfer: hold reason " + job->hold_reason);
  check(tb.clear_fault(testbed::FaultKind::CorruptTransfer, "grid-v"), "corrupt_transfer: nothing to clear");
  try {
    remote_date_succeeds(tb);
  } catch (const Failure& f) {
    throw Failure{"corrupt_transfer cleared: " + f.reason};
  }
  check(tb.active_faults().empty(), "faults remain active");
}

// ---------------------------------------------------------------------------
// 6. Scheduler oracle

struct Req {
  std::optional<std::int64_t> min_memory;
  std::optional<std::string> arch;
  bool use_or = false;

  std::string text() const {
    std::vector<std::string> parts;
    if (min_memory) parts.push_back(fmt::format("TARGET.Memory >= {}", *min_memory));
    if (arch) parts.push_back(fmt::format("TARGET.Arch == \"{}\"", *arch));
    if (parts.empty()) return "TRUE";
    if (parts.size() == 1) return parts[0];
    return parts[0] + (use_or ? " || " : " && ") + parts[1];
  }

  bool holds(const lrm::SlotShape& s) const {
    auto lower = [](std::string v) {
      for (auto& c : v) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      return v;
    };
    std::vector<bool> parts;
    if (min_memory) parts.push_back(s.memory >= *min_memory);
    if (arch) parts.push_back(lower(s.arch) == lower(*arch));
    if (parts.empty()) return true;
    if (parts.size() == 1) return parts[0];
    return use_or ? (parts[0] || parts[1]) : (parts[0] && parts[1]);
  }
};

struct OracleJob {
  lrm::JobId id;
  int priority;
  Timestamp submitted;
  Req req;
  bool rank_by_memory;
};

using Assignment = std::vector<std::pair<lrm::JobId, std::string>>;

/// Tries every job order and every slot choice, and keeps the assignment
/// that is lexicographically best under the policy: jobs considered by
/// priority, then submission time, then id; each takes the free matching
/// slot of highest rank, ties broken by slot name.
Assignment brute_force(const std::vector<OracleJob>& jobs, const std::vector<lrm::SlotShape>& shapes,
                       const std::vector<bool>& free, const std::string& host) {
  std::vector<std::size_t> order(jobs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto precedes = [&](std::size_t a, std::size_t b) {
    const auto& x = jobs[a];
    const auto& y = jobs[b];
    if (x.priority != y.priority) return x.priority > y.priority;
    if (x.submitted != y.submitted) return x.submitted < y.submitted;
    return x.id < y.id;
  };
  // The policy order is the single permutation in which every job precedes
  // all later ones.
  std::vector<std::size_t> policy;
  do {
    bool ok = true;
    for (std::size_t i = 0; ok && i < order.size(); ++i) {
      for (std::size_t j = i + 1; ok && j < order.size(); ++j) ok = precedes(order[i], order[j]);
    }
    if (ok) policy = order;
  } while (std::next_permutation(order.begin(), order.end()));

  auto slot_name = [&](std::size_t s) { return fmt::format("slot{}@{}", s + 1, host); };
  Assignment out;
  auto avail = free;
  for (auto j : policy) {
    const auto& job = jobs[j];
    std::vector<std::size_t> candidates;
    for (std::size_t s = 0; s < shapes.size(); ++s) {
      if (avail[s] && job.req.holds(shapes[s])) candidates.push_back(s);
    }
    if (candidates.empty()) continue;
    auto rank = [&](std::size_t s) { return job.rank_by_memory ? shapes[s].memory : std::int64_t{0}; };
    std::size_t best = candidates[0];
    for (auto s : candidates) {
      if (rank(s) > rank(best) || (rank(s) == rank(best) && slot_name(s) < slot_name(best))) best = s;
    }
    avail[best] = false;
    out.emplace_back(job.id, slot_name(best));
  }
  return out;
}

/// Runs no programs: the oracle only looks at assignments.
class NullExecutor : public lrm::Executor {
 public:
  lrm::ExecResult execute(const lrm::ExecRequest&) override { return {"", "", 0, seconds(1)}; }
};

void scheduler_oracle() {
  const auto dir = fresh_dir("scheduler");
  NodeFs fs(dir);
  fs.write("/bin/hostname", "#!minigrid-task hostname\n");
  NullExecutor exec;
  const auto base = testbed::base_epoch();
  std::mt19937_64 rng(500);
  const std::vector<std::string> arches = {"INTEL", "X86_64", "ppc"};
  int mismatches = 0;
  int assigned = 0;
  std::string first;
  for (int trial = 0; trial < 500; ++trial) {
    lrm::LrmConfig c;
    c.host = "oracle.example.org";
    c.state_dir = fmt::format("/var/lib/trial{}", trial);
    const int nslots = std::uniform_int_distribution<int>(1, 6)(rng);
    for (int s = 0; s < nslots; ++s) {
      c.shapes.push_back({"LINUX", arches[rng() % arches.size()],
                          std::int64_t{256} * std::uniform_int_distribution<int>(1, 8)(rng)});
    }
    lrm::Lrm lrm(c, fs, exec, base);

    std::vector<OracleJob> jobs;
    const int njobs = std::uniform_int_distribution<int>(0, 6)(rng);
    for (int j = 0; j < njobs; ++j) {
      jobspec::SubmitDescription sd;
      sd.executable = "/bin/hostname";
      Req req;
      if (rng() % 2) req.min_memory = std::int64_t{256} * std::uniform_int_distribution<int>(1, 8)(rng);
      if (rng() % 2) req.arch = arches[rng() % arches.size()];
      req.use_or = rng() % 2;
      sd.requirements = req.text();
      const bool by_memory = rng() % 2;
      if (by_memory) sd.rank = "TARGET.Memory";
      sd.priority = std::uniform_int_distribution<int>(0, 2)(rng);
      const auto when = base + seconds(std::uniform_int_distribution<int>(0, 3)(rng));
      const auto id = lrm.submit({&sd, 1}, "u", when, {"/home/u", {}}).first;
      jobs.push_back({id, sd.priority, when, req, by_memory});
    }
    std::vector<bool> free;
    for (const auto& slot : lrm.query_status()) free.push_back(slot.state == lrm::SlotState::Unclaimed);
    const auto expected = brute_force(jobs, c.shapes, free, c.host);
    const auto actual = lrm.schedule_tick(base + seconds(10));
    assigned += static_cast<int>(actual.size());
    if (expected != actual) {
      if (mismatches == 0) first = fmt::format("trial {}: {} expected, {} assigned", trial, expected.size(), actual.size());
      ++mismatches;
    }
  }
  check(mismatches == 0, fmt::format("{} of 500 instances mismatch; first {}", mismatches, first));
  check(assigned > 0, "no instance assigned any job");
}

// ---------------------------------------------------------------------------
// 7. State-machine safety

bool legal(lrm::JobState from, lrm::JobState to) {
  using S = lrm::JobState;
  static const std::set<std::pair<S, S>> edges = {
      {S::Idle, S::Running},      {S::Idle, S::Removed},     {S::Idle, S::Held},
      {S::Running, S::Completed}, {S::Running, S::Idle},     {S::Running, S::Suspended},
      {S::Running, S::Removed},   {S::Suspended, S::Running}, {S::Suspended, S::Removed},
      {S::Held, S::Idle},         {S::Held, S::Removed},
  };
  return edges.count({from, to}) > 0;
}

void state_machine_safety() {
  // Every scenario contributes its logs, on top of the runs above.
  const std::vector<std::pair<std::string, std::string>> scenarios = {
      {"local-submit.scn", "single-site.cfg"}, {"history-cluster13.scn", "cluster13.cfg"},
      {"globus-job-run.scn", "three-site.cfg"},    {"grid-universe.scn", "three-site.cfg"},
      {"neutrality.scn", "neutral.cfg"},       {"clock-skew.scn", "three-site.cfg"},
  };
  for (const auto& [script, config] : scenarios) run_script(script, config, "replay-" + script);

  int events = 0;
  int jobs = 0;
  for (const auto& dir : run_dirs()) {
    if (!std::filesystem::exists(dir)) continue;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      const auto log = entry.path() / "var/log/minigrid/lrm.log";
      if (!std::filesystem::exists(log)) continue;
      std::map<lrm::JobId, lrm::JobState> state;
      for (const auto& line : strings::split_lines(read_file(log))) {
        // Lines are "<date> <time> <event>".
        const auto start = line.find(" job ");
        if (start == std::string::npos) continue;
        const auto event = lrm::parse_event(std::string_view(line).substr(start + 1));
        if (!event) continue;
        ++events;
        const auto where = fmt::format("{}: '{}'", log.string(), line);
        if (!event->from) {
          check(!state.count(event->id), "job submitted twice at " + where);
          check(event->to == lrm::JobState::Idle, "job not submitted Idle at " + where);
          state[event->id] = event->to;
          ++jobs;
          continue;
        }
        const auto it = state.find(event->id);
        check(it != state.end(), "transition before submission at " + where);
        check(it->second == *event->from, "transition from a state the job was not in at " + where);
        check(legal(*event->from, event->to), "illegal transition at " + where);
        it->second = event->to;
      }
    }
  }
  check(jobs > 0 && events > jobs, fmt::format("too little to replay: {} jobs, {} events", jobs, events));
  std::printf("  replayed %d events of %d jobs\n", events, jobs);
}

// ---------------------------------------------------------------------------
// 8. Credential properties

void credential_properties() {
  const auto dir = fresh_dir("credentials");
  NodeFs fs(dir);
  gsi::DeterministicSeed seed(8);
  const auto ca_time = testbed::base_epoch() - hours(24);
  const auto ca = gsi::CertificateAuthority::init(fs, "/ca", "simpleCA-acceptance", ca_time, seed);
  const auto user = ca.issue("/O=Grid/OU=Acceptance/CN=Tester", hours(24 * 365), "pw", ca_time, seed);
  const std::vector<gsi::Certificate> anchors{ca.root()};

  std::mt19937_64 rng(1000);
  int false_accepts = 0;
  int false_rejects = 0;
  int tampered = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto issued_at = testbed::base_epoch() + seconds(std::uniform_int_distribution<int>(0, 86400 * 60)(rng));
    const auto lifetime = seconds(std::uniform_int_distribution<int>(60, 86400)(rng));
    const auto proxy = gsi::proxy_init(user.cert, user.key, "pw", issued_at, seed, lifetime);
    auto chain = gsi::delegate(proxy, issued_at, seed).chain;
    const auto now = issued_at + seconds(std::uniform_int_distribution<int>(0, 59)(rng));

    const bool tamper = rng() % 2;
    bool decodable = true;
    if (tamper) {
      ++tampered;
      const auto which = rng() % chain.size();
      auto bytes = gsi::encode_certificate(chain[which]);
      const auto pos = rng() % bytes.size();
      bytes[pos] = static_cast<char>(bytes[pos] ^ (1u << (rng() % 8)));
      try {
        chain[which] = gsi::decode_certificate(bytes);
      } catch (const Error&) {
        decodable = false;
      }
    }
    bool accepted = false;
    if (decodable) {
      try {
        gsi::verify_chain(chain, anchors, now, Duration{0});
        accepted = true;
      } catch (const Error&) {
      }
    }
    if (tamper && accepted) ++false_accepts;
    if (!tamper && !accepted) ++false_rejects;
  }
  check(tampered > 0 && tampered < 1000, "trials were not mixed");
  check(false_accepts == 0, fmt::format("{} false accepts", false_accepts));
  check(false_rejects == 0, fmt::format("{} false rejects", false_rejects));

  // Skew boundaries on a chain whose window is [t, t + 12 h].
  const auto t = testbed::base_epoch() + hours(2);
  const auto chain = gsi::proxy_init(user.cert, user.key, "pw", t, seed).chain;
  const auto max_skew = gsi::kDefaultMaxSkew;
  auto outcome = [&](Timestamp now) -> std::string {
    try {
      gsi::verify_chain(chain, anchors, now, max_skew);
      return "ok";
    } catch (const Error& e) {
      return std::string(to_string(e.code()));
    }
  };
  const auto not_before = chain[0].not_before;
  const auto not_after = chain[0].not_after;
  const std::vector<std::pair<Timestamp, std::string>> boundary = {
      {not_before - max_skew, "ok"},
      {not_before - max_skew + seconds(1), "ok"},
      {not_before - max_skew - seconds(1), "FutureCertificate"},
      {not_after + max_skew, "ok"},
      {not_after + max_skew - seconds(1), "ok"},
      {not_after + max_skew + seconds(1), "Expired"},
  };
  for (const auto& [when, want] : boundary) {
    const auto got = outcome(when);
    check(got == want, fmt::format("at {} expected {}, got {}", format_iso(when), want, got));
  }
}

// ---------------------------------------------------------------------------
// 9. Determinism

void determinism() {
  const std::vector<std::pair<std::string, std::string>> scenarios = {
      {"local-submit.scn", "single-site.cfg"},
      {"globus-job-run.scn", "three-site.cfg"},
      {"grid-universe.scn", "three-site.cfg"},
  };
  for (const auto& [script, config] : scenarios) {
    const auto a = run_script(script, config, "determinism-a-" + script);
    const auto b = run_script(script, config, "determinism-b-" + script);
    check(!a.empty(), script + ": empty transcript");
    check(a == b, script + ": transcripts differ");
  }
}

}  // namespace
}  // namespace minigrid::acceptance

int main() {
  using namespace minigrid::acceptance;
  const std::vector<std::pair<std::string, std::function<void()>>> criteria = {
      {"local-submit round trip", local_submit},
      {"remote run with a 12 h proxy", globus_job_run},
      {"grid-universe watch sequence", grid_universe},
      {"adapter neutrality", neutrality},
      {"fault taxonomy", fault_taxonomy},
      {"scheduler oracle", scheduler_oracle},
      {"state-machine safety", state_machine_safety},
      {"credential properties", credential_properties},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& [name, fn] = criteria[i];
    const auto start = std::chrono::steady_clock::now();
    std::string reason;
    try {
      fn();
    } catch (const Failure& f) {
      reason = f.reason;
    } catch (const std::exception& e) {
      reason = std::string("unexpected exception: ") + e.what();
    }
    const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (reason.empty()) {
      std::printf("PASS %zu %s (%.2f s)\n", i + 1, name.c_str(), secs);
    } else {
      ++failed;
      std::printf("FAIL %zu %s (%.2f s): %s\n", i + 1, name.c_str(), secs, reason.c_str());
    }
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  for (const auto& dir : run_dirs()) std::filesystem::remove_all(dir);
  return failed == 0 ? 0 : 1;
}
