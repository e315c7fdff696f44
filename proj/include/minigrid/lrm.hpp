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

// The per-site batch-queue resource manager: job queue, slot pool,
// scheduler, state machine and persisted history.

#include <array>
#include <compare>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "minigrid/classad.hpp"
#include "minigrid/jobspec.hpp"
#include "minigrid/nodefs.hpp"
#include "minigrid/time.hpp"

namespace minigrid::lrm {

struct JobId {
  int cluster = 0;
  int proc = 0;

  std::string str() const;
  /// Parses "C.P" (or "C", meaning proc 0); throws Error(Usage).
  static JobId parse(std::string_view text);

  auto operator<=>(const JobId&) const = default;
};

enum class JobState { Idle, Running, Completed, Removed, Held, Suspended };

inline constexpr std::array<JobState, 6> kAllStates = {JobState::Idle,    JobState::Running, JobState::Completed,
                                                       JobState::Removed, JobState::Held,    JobState::Suspended};

/// Single-letter code: I, R, C, X, H, S.
char state_code(JobState s);
std::string_view state_name(JobState s);
std::optional<JobState> state_from_name(std::string_view name);
std::optional<JobState> state_from_code(char code);

bool is_terminal(JobState s);
bool is_legal_transition(JobState from, JobState to);
/// Shortest legal path from `from` to `to`, excluding `from`; empty when
/// equal or unreachable.
std::vector<JobState> legal_path(JobState from, JobState to);

/// What the executor is asked to run when a job is dispatched to a slot.
struct ExecRequest {
  JobId id;
  std::string owner;
  std::string executable;  // path as submitted
  std::string program;     // spooled executable content
  std::vector<std::string> arguments;
  std::string stdin_data;
  std::string slot;
  Timestamp now;
};

struct ExecResult {
  std::string out;
  std::string err;
  int exit_code = 0;
  Duration duration{0};
};

/// Runs job payloads. The testbed interprets task programs; a test can
/// script results directly.
class Executor {
 public:
  virtual ~Executor() = default;
  virtual ExecResult execute(const ExecRequest& req) = 0;
};

struct SubmitContext {
  /// Directory (node path) relative file names resolve against.
  std::string iwd = "/";
  /// Files already delivered elsewhere, keyed by the name the description
  /// uses, valued by the node path holding the content.
  std::map<std::string, std::string> staged;
};

struct JobRecord {
  JobId id;
  std::string owner;
  Timestamp submitted;
  Duration run_time{0};
  JobState state = JobState::Idle;
  int priority = 0;
  std::string cmd;  // executable plus arguments
  jobspec::SubmitDescription spec;
  std::optional<std::string> claimed_slot;
  std::optional<Timestamp> completed_at;

  bool grid = false;
  std::string iwd;
  std::string spool_dir;
  std::string hold_reason;
  int exit_code = 0;
  std::optional<Timestamp> running_since;
  std::optional<Timestamp> finish_at;
  Duration remaining{0};  // run time still owed while Suspended
  std::optional<ExecResult> result;

  /// Queue CMD column: executable basename plus arguments.
  std::string display_cmd() const;
};

enum class SlotState { Unclaimed, Claimed, Owner };
enum class Activity { Idle, Busy };

std::string_view to_string(SlotState s);
std::string_view to_string(Activity a);

struct SlotAd {
  std::string name;  // slotN@host
  std::string opsys = "LINUX";
  std::string arch = "INTEL";
  SlotState state = SlotState::Unclaimed;
  Activity activity = Activity::Idle;
  double load_avg = 0.0;
  std::int64_t memory = 1001;
  Timestamp entered_activity;
  std::optional<JobId> job;

  Duration activity_time(Timestamp now) const { return now - entered_activity; }
  classad::ClassAd to_classad() const;
};

/// Job ad used for matchmaking: Owner, Cmd, Requirements (TRUE when
/// absent), Rank when given, JobPrio.
classad::ClassAd job_classad(const JobRecord& job);

struct Summary {
  int completed = 0, removed = 0, idle = 0, running = 0, held = 0, suspended = 0;

  int total() const { return completed + removed + idle + running + held + suspended; }
  void count(JobState s);
};

/// "N jobs; a completed, b removed, c idle, d running, e held, f suspended"
std::string summary_line(const Summary& s);

struct QueueRow {
  JobId id;
  std::string owner;
  Timestamp submitted;
  Duration run_time{0};
  JobState state = JobState::Idle;
  int priority = 0;
  double size_mb = 0.0;
  std::string cmd;
  std::string hold_reason;
};

struct QueueSnapshot {
  std::string submitter;
  Timestamp taken;
  std::vector<QueueRow> rows;  // JobId ascending
  Summary summary;
};

struct HistoryRow {
  JobId id;
  std::string owner;
  Timestamp submitted;
  Duration run_time{0};
  JobState state = JobState::Completed;
  Timestamp completed;
  std::string cmd;
  int exit_code = 0;

  bool operator==(const HistoryRow&) const = default;
};

/// Tab-separated history file with a version header line.
std::string encode_history_row(const HistoryRow& row);
std::optional<HistoryRow> decode_history_row(std::string_view line);
inline constexpr std::string_view kHistoryHeader = "# minigrid-history v1";

/// Newest completion first, higher JobId first on ties.
void sort_history(std::vector<HistoryRow>& rows);

std::string render_status(std::span<const SlotAd> slots, Timestamp now);
std::string render_queue(const QueueSnapshot& snap);
std::string render_history(std::span<const HistoryRow> rows);

/// A state change or lifecycle event, reported to the daemon log.
struct LrmEvent {
  Timestamp at;
  JobId id;
  std::optional<JobState> from;  // empty for the submission event
  JobState to = JobState::Idle;
  std::string detail;
};

/// "job 13.0 Idle -> Running slot1@host" or "job 13.0 submitted Idle".
std::string format_event(const LrmEvent& e);
/// Inverse of format_event on the state-carrying fields.
std::optional<LrmEvent> parse_event(std::string_view text);

/// Per-slot machine description for heterogeneous pools.
struct SlotShape {
  std::string opsys = "LINUX";
  std::string arch = "INTEL";
  std::int64_t memory = 1001;
};

struct LrmConfig {
  std::string host = "localhost";
  int slots = 2;
  /// When non-empty, one slot per shape and `slots` is ignored.
  std::vector<SlotShape> shapes;
  std::string opsys = "LINUX";
  std::string arch = "INTEL";
  std::int64_t memory = 1001;
  Duration linger = seconds(4);
  std::string state_dir = "/var/lib/minigrid";  // node path
  int first_cluster = 1;
};

class Lrm {
 public:
  Lrm(LrmConfig config, NodeFs fs, Executor& executor, Timestamp now);

  struct SubmitResult {
    JobId first;
    int count = 0;
    std::string ack;  // "N job(s) submitted to cluster C."
  };

  /// Vanilla descriptions only; the whole batch shares one cluster.
  /// Throws Error(SpoolFailure) when an executable or input is missing.
  SubmitResult submit(std::span<const jobspec::SubmitDescription> sds, const std::string& owner, Timestamp now,
                      const SubmitContext& ctx);

  /// Grid-universe record: never scheduled locally, its state is driven by
  /// mirror_step.
  SubmitResult submit_grid(const jobspec::SubmitDescription& sd, const std::string& owner, Timestamp now,
                           const std::string& iwd);

  /// Assigns Idle jobs to Unclaimed slots; returns the assignments made.
  std::vector<std::pair<JobId, std::string>> schedule_tick(Timestamp now);

  void complete(JobId id, Timestamp now, int exit_code);
  void remove(JobId id, Timestamp now);
  void hold(JobId id, Timestamp now, std::string reason);
  void release(JobId id, Timestamp now);
  void suspend(JobId id, Timestamp now);
  void resume(JobId id, Timestamp now);
  /// Running back to Idle, releasing the slot.
  void vacate(JobId id, Timestamp now);

  /// Moves a grid record one legal step toward `target` (every step when
  /// `all_steps`). Returns true if the state changed. `remote_run_time`
  /// updates RUN_TIME monotonically; `remote_slot` names the claim while
  /// Running or Suspended.
  bool mirror_step(JobId id, JobState target, Timestamp now, Duration remote_run_time = Duration{0},
                   const std::string& remote_slot = {}, bool all_steps = false);
  void set_hold_reason(JobId id, std::string reason);
  void set_exit_code(JobId id, int exit_code);
  /// Writes captured output for a grid record into its sd.output/sd.error.
  void deliver_output(JobId id, std::string_view out, std::string_view err);
  /// Appends an event line to the job's user log, if it has one.
  void write_user_log(JobId id, Timestamp now, std::string_view code, std::string_view text);

  /// Completes jobs whose run finished, retires lingering terminal jobs to
  /// history, then schedules.
  void pump(Timestamp now);

  QueueSnapshot query_queue(Timestamp now) const;
  std::vector<SlotAd> query_status() const { return slots_; }
  std::vector<HistoryRow> query_history() const;

  const JobRecord* find(JobId id) const;
  std::optional<HistoryRow> find_history(JobId id) const;

  void set_observer(std::function<void(const LrmEvent&)> observer) { observer_ = std::move(observer); }
  const LrmConfig& config() const { return config_; }
  const NodeFs& fs() const { return fs_; }
  int next_cluster() const { return next_cluster_; }

 private:
  JobRecord& get(JobId id);
  void transition(JobRecord& job, JobState to, Timestamp now, std::string detail = {});
  void release_slot(JobRecord& job, Timestamp now);
  void dispatch(JobRecord& job, SlotAd& slot, Timestamp now);
  void finish_run(JobRecord& job, Timestamp now);
  void retire(JobRecord& job);
  std::string history_path() const;
  void emit(const LrmEvent& e) const;

  LrmConfig config_;
  NodeFs fs_;
  Executor& executor_;
  std::vector<SlotAd> slots_;
  std::map<JobId, JobRecord> jobs_;
  std::vector<HistoryRow> history_;
  int next_cluster_ = 1;
  std::function<void(const LrmEvent&)> observer_;
};

}  // namespace minigrid::lrm
