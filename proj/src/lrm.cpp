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

#include "minigrid/lrm.hpp"

#include <algorithm>
#include <charconv>
#include <deque>

#include <fmt/format.h>

#include "minigrid/error.hpp"
#include "minigrid/strings.hpp"

namespace minigrid::lrm {

namespace {

constexpr std::array<std::string_view, 6> kStateNames = {"Idle", "Running", "Completed", "Removed", "Held",
                                                         "Suspended"};
constexpr std::string_view kStateCodes = "IRCXHS";

std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<std::int64_t> parse_i64(std::string_view s) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string rstrip_lines(const std::string& text) {
  std::string out;
  for (const auto& line : strings::split_lines(text)) {
    auto end = line.find_last_not_of(' ');
    out += end == std::string::npos ? std::string() : line.substr(0, end + 1);
    out += '\n';
  }
  return out;
}

// Tabs and newlines cannot appear inside a history field.
std::string escape_field(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_field(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      const char n = s[++i];
      out += n == 't' ? '\t' : n == 'n' ? '\n' : n;
    } else {
      out += s[i];
    }
  }
  return out;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Identifiers and states

std::string JobId::str() const { return fmt::format("{}.{}", cluster, proc); }

JobId JobId::parse(std::string_view text) {
  const auto dot = text.find('.');
  const auto cluster = parse_int(text.substr(0, dot));
  const auto proc = dot == std::string_view::npos ? std::optional<int>(0) : parse_int(text.substr(dot + 1));
  if (!cluster || !proc || *cluster <= 0 || *proc < 0) {
    throw Error(Errc::Usage, fmt::format("malformed job id '{}'", text));
  }
  return {*cluster, *proc};
}

char state_code(JobState s) { return kStateCodes[static_cast<std::size_t>(s)]; }
std::string_view state_name(JobState s) { return kStateNames[static_cast<std::size_t>(s)]; }

std::optional<JobState> state_from_name(std::string_view name) {
  for (auto s : kAllStates) {
    if (state_name(s) == name) return s;
  }
  return std::nullopt;
}

std::optional<JobState> state_from_code(char code) {
  const auto pos = kStateCodes.find(code);
  if (pos == std::string_view::npos) return std::nullopt;
  return kAllStates[pos];
}

bool is_terminal(JobState s) { return s == JobState::Completed || s == JobState::Removed; }

bool is_legal_transition(JobState from, JobState to) {
  using S = JobState;
  switch (from) {
    case S::Idle: return to == S::Running || to == S::Removed || to == S::Held;
    case S::Running: return to == S::Completed || to == S::Idle || to == S::Suspended || to == S::Removed;
    case S::Suspended: return to == S::Running || to == S::Removed;
    case S::Held: return to == S::Idle || to == S::Removed;
    case S::Completed:
    case S::Removed: return false;
  }
  return false;
}

std::vector<JobState> legal_path(JobState from, JobState to) {
  if (from == to) return {};
  std::array<std::optional<JobState>, 6> parent{};
  std::array<bool, 6> seen{};
  std::deque<JobState> frontier{from};
  seen[static_cast<std::size_t>(from)] = true;
  while (!frontier.empty()) {
    const auto cur = frontier.front();
    frontier.pop_front();
    if (cur == to) break;
    for (auto next : kAllStates) {
      const auto i = static_cast<std::size_t>(next);
      if (!seen[i] && is_legal_transition(cur, next)) {
        seen[i] = true;
        parent[i] = cur;
        frontier.push_back(next);
      }
    }
  }
  if (!seen[static_cast<std::size_t>(to)]) return {};
  std::vector<JobState> path;
  for (auto s = to; s != from; s = *parent[static_cast<std::size_t>(s)]) path.push_back(s);
  std::reverse(path.begin(), path.end());
  return path;
}

std::string JobRecord::display_cmd() const {
  std::string out = strings::basename(spec.executable);
  if (!spec.arguments.empty()) out += " " + strings::join_arguments(spec.arguments);
  return out;
}

std::string_view to_string(SlotState s) {
  switch (s) {
    case SlotState::Unclaimed: return "Unclaimed";
    case SlotState::Claimed: return "Claimed";
    case SlotState::Owner: return "Owner";
  }
  return "?";
}

std::string_view to_string(Activity a) { return a == Activity::Idle ? "Idle" : "Busy"; }

classad::ClassAd SlotAd::to_classad() const {
  classad::ClassAd ad(classad::AdKind::Machine);
  ad.set("Name", name)
      .set("OpSys", opsys)
      .set("Arch", arch)
      .set("State", std::string(to_string(state)))
      .set("Activity", std::string(to_string(activity)))
      .set("LoadAvg", load_avg)
      .set("Memory", memory);
  return ad;
}

classad::ClassAd job_classad(const JobRecord& job) {
  classad::ClassAd ad(classad::AdKind::Job);
  ad.set("Owner", job.owner).set("Cmd", job.spec.executable).set("JobPrio", std::int64_t{job.priority});
  ad.set_expr("Requirements", job.spec.requirements.value_or("TRUE"));
  if (job.spec.rank) ad.set_expr("Rank", *job.spec.rank);
  return ad;
}

void Summary::count(JobState s) {
  switch (s) {
    case JobState::Idle: ++idle; break;
    case JobState::Running: ++running; break;
    case JobState::Completed: ++completed; break;
    case JobState::Removed: ++removed; break;
    case JobState::Held: ++held; break;
    case JobState::Suspended: ++suspended; break;
  }
}

std::string summary_line(const Summary& s) {
  return fmt::format("{} jobs; {} completed, {} removed, {} idle, {} running, {} held, {} suspended", s.total(),
                     s.completed, s.removed, s.idle, s.running, s.held, s.suspended);
}

// ---------------------------------------------------------------------------
// History file

std::string encode_history_row(const HistoryRow& r) {
  return fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}", r.id.str(), escape_field(r.owner), to_epoch_ms(r.submitted),
                     r.run_time.count(), state_code(r.state), to_epoch_ms(r.completed), r.exit_code,
                     escape_field(r.cmd));
}

std::optional<HistoryRow> decode_history_row(std::string_view line) {
  const auto f = split_tabs(line);
  if (f.size() != 8 || f[4].size() != 1) return std::nullopt;
  HistoryRow r;
  try {
    r.id = JobId::parse(f[0]);
  } catch (const Error&) {
    return std::nullopt;
  }
  const auto submitted = parse_i64(f[2]);
  const auto run_time = parse_i64(f[3]);
  const auto state = state_from_code(f[4][0]);
  const auto completed = parse_i64(f[5]);
  const auto exit_code = parse_int(f[6]);
  if (!submitted || !run_time || !state || !completed || !exit_code) return std::nullopt;
  r.owner = unescape_field(f[1]);
  r.submitted = from_epoch_ms(*submitted);
  r.run_time = Duration{*run_time};
  r.state = *state;
  r.completed = from_epoch_ms(*completed);
  r.exit_code = *exit_code;
  r.cmd = unescape_field(f[7]);
  return r;
}

void sort_history(std::vector<HistoryRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const HistoryRow& a, const HistoryRow& b) {
    if (a.completed != b.completed) return a.completed > b.completed;
    return a.id > b.id;
  });
}

// ---------------------------------------------------------------------------
// Renderers

std::string render_status(std::span<const SlotAd> slots, Timestamp now) {
  std::size_t name_width = 4;
  for (const auto& s : slots) name_width = std::max(name_width, s.name.size());

  std::string out = fmt::format("{:<{}} {:<6} {:<6} {:<9} {:<8} {:<6} {:<5} {}\n\n", "Name", name_width, "OpSys",
                                "Arch", "State", "Activity", "LoadAv", "Mem", "ActvtyTime");
  for (const auto& s : slots) {
    out += fmt::format("{:<{}} {:<6} {:<6} {:<9} {:<8} {:<6.3f} {:<5} {}\n", s.name, name_width, s.opsys, s.arch,
                       to_string(s.state), to_string(s.activity), s.load_avg, s.memory,
                       format_runtime(s.activity_time(now)));
  }

  struct Totals {
    int total = 0, owner = 0, claimed = 0, unclaimed = 0;
    void add(const SlotAd& s) {
      ++total;
      if (s.state == SlotState::Owner) ++owner;
      if (s.state == SlotState::Claimed) ++claimed;
      if (s.state == SlotState::Unclaimed) ++unclaimed;
    }
  };
  std::map<std::string, Totals> groups;
  Totals all;
  for (const auto& s : slots) {
    groups[s.arch + "/" + s.opsys].add(s);
    all.add(s);
  }
  auto totals_row = [](std::string_view label, const Totals& t) {
    return fmt::format("{:>20} {:>5} {:>5} {:>7} {:>9} {:>7} {:>10} {:>8}\n", label, t.total, t.owner, t.claimed,
                       t.unclaimed, 0, 0, 0);
  };
  out += fmt::format("\n{:>20} {:>5} {:>5} {:>7} {:>9} {:>7} {:>10} {:>8}\n\n", "", "Total", "Owner", "Claimed",
                     "Unclaimed", "Matched", "Preempting", "Backfill");
  for (const auto& [label, t] : groups) out += totals_row(label, t) + "\n";
  out += totals_row("Total", all);
  return rstrip_lines(out);
}

std::string render_queue(const QueueSnapshot& snap) {
  std::string out = fmt::format("-- Submitter: {}\n", snap.submitter);
  out += fmt::format(" {:<7} {:<10} {:<11} {:>12} {:<2} {:<3} {:<4} {}\n", "ID", "OWNER", "SUBMITTED", "RUN_TIME",
                     "ST", "PRI", "SIZE", "CMD");
  for (const auto& r : snap.rows) {
    out += fmt::format(" {:<7} {:<10} {:<11} {:>12} {:<2} {:<3} {:<4.1f} {}\n", r.id.str(), r.owner,
                       format_short(r.submitted), format_runtime(r.run_time), state_code(r.state), r.priority,
                       r.size_mb, r.cmd);
  }
  out += "\n" + summary_line(snap.summary) + "\n";
  return rstrip_lines(out);
}

std::string render_history(std::span<const HistoryRow> rows) {
  std::string out = fmt::format(" {:<7} {:<10} {:<11} {:>12} {:<2} {:<11} {}\n", "ID", "OWNER", "SUBMITTED",
                                "RUN_TIME", "ST", "COMPLETED", "CMD");
  for (const auto& r : rows) {
    out += fmt::format(" {:<7} {:<10} {:<11} {:>12} {:<2} {:<11} {}\n", r.id.str(), r.owner,
                       format_short(r.submitted), format_runtime(r.run_time), state_code(r.state),
                       format_short(r.completed), r.cmd.substr(0, 15));
  }
  return rstrip_lines(out);
}

// ---------------------------------------------------------------------------
// Event lines

std::string format_event(const LrmEvent& e) {
  std::string out = e.from ? fmt::format("job {} {} -> {}", e.id.str(), state_name(*e.from), state_name(e.to))
                           : fmt::format("job {} submitted {}", e.id.str(), state_name(e.to));
  if (!e.detail.empty()) out += " " + e.detail;
  return out;
}

std::optional<LrmEvent> parse_event(std::string_view text) {
  const auto words = strings::split_ws(text);
  if (words.size() < 4 || words[0] != "job") return std::nullopt;
  LrmEvent e;
  try {
    e.id = JobId::parse(words[1]);
  } catch (const Error&) {
    return std::nullopt;
  }
  if (words[2] == "submitted") {
    const auto to = state_from_name(words[3]);
    if (!to) return std::nullopt;
    e.to = *to;
    return e;
  }
  if (words.size() < 5 || words[3] != "->") return std::nullopt;
  const auto from = state_from_name(words[2]);
  const auto to = state_from_name(words[4]);
  if (!from || !to) return std::nullopt;
  e.from = *from;
  e.to = *to;
  return e;
}

// ---------------------------------------------------------------------------
// The daemon

Lrm::Lrm(LrmConfig config, NodeFs fs, Executor& executor, Timestamp now)
    : config_(std::move(config)), fs_(std::move(fs)), executor_(executor) {
  auto shapes = config_.shapes;
  if (shapes.empty()) shapes.assign(std::max(0, config_.slots), SlotShape{config_.opsys, config_.arch, config_.memory});
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    SlotAd slot;
    slot.name = fmt::format("slot{}@{}", i + 1, config_.host);
    slot.opsys = shapes[i].opsys;
    slot.arch = shapes[i].arch;
    slot.memory = shapes[i].memory;
    slot.entered_activity = now;
    slots_.push_back(std::move(slot));
  }
  next_cluster_ = std::max(1, config_.first_cluster);
  if (const auto text = fs_.read(history_path())) {
    for (const auto& line : strings::split_lines(*text)) {
      if (line.empty() || line.front() == '#') continue;
      if (auto row = decode_history_row(line)) {
        next_cluster_ = std::max(next_cluster_, row->id.cluster + 1);
        history_.push_back(std::move(*row));
      }
    }
  } else {
    fs_.write(history_path(), std::string(kHistoryHeader) + "\n");
  }
}

std::string Lrm::history_path() const { return NodeFs::resolve(config_.state_dir, "history"); }

void Lrm::emit(const LrmEvent& e) const {
  if (observer_) observer_(e);
}

JobRecord& Lrm::get(JobId id) {
  auto it = jobs_.find(id);
  if (it == jobs_.end()) throw Error(Errc::UnknownJob, fmt::format("job {} is not in the queue", id.str()));
  return it->second;
}

const JobRecord* Lrm::find(JobId id) const {
  auto it = jobs_.find(id);
  return it == jobs_.end() ? nullptr : &it->second;
}

std::optional<HistoryRow> Lrm::find_history(JobId id) const {
  for (const auto& row : history_) {
    if (row.id == id) return row;
  }
  return std::nullopt;
}

Lrm::SubmitResult Lrm::submit(std::span<const jobspec::SubmitDescription> sds, const std::string& owner,
                              Timestamp now, const SubmitContext& ctx) {
  auto locate = [&](const std::string& name) {
    if (auto it = ctx.staged.find(name); it != ctx.staged.end()) return it->second;
    return NodeFs::resolve(ctx.iwd, name);
  };

  // Everything is read before anything is allocated, so a failed submit
  // leaves the queue untouched.
  struct Prepared {
    std::string program;
    std::optional<std::string> input;
  };
  std::vector<Prepared> prepared;
  for (const auto& sd : sds) {
    if (sd.universe != jobspec::Universe::Vanilla) {
      throw Error(Errc::Usage, "grid-universe descriptions are routed through the grid manager");
    }
    Prepared p;
    auto program = fs_.read(locate(sd.executable));
    if (!program) throw Error(Errc::SpoolFailure, fmt::format("executable {} not found", sd.executable));
    p.program = std::move(*program);
    if (sd.input) {
      p.input = fs_.read(locate(*sd.input));
      if (!p.input) throw Error(Errc::SpoolFailure, fmt::format("input file {} not found", *sd.input));
    }
    prepared.push_back(std::move(p));
  }
  if (sds.empty()) throw Error(Errc::MissingQueue, "nothing to submit");

  const int cluster = next_cluster_++;
  int proc = 0;
  for (std::size_t i = 0; i < sds.size(); ++i) {
    const auto& sd = sds[i];
    for (int n = 0; n < std::max(1, sd.queue_count); ++n) {
      JobRecord job;
      job.id = {cluster, proc++};
      job.owner = owner;
      job.submitted = now;
      job.priority = sd.priority;
      job.spec = sd;
      job.spec.queue_count = 1;
      job.cmd = sd.executable;
      if (!sd.arguments.empty()) job.cmd += " " + strings::join_arguments(sd.arguments);
      job.iwd = ctx.iwd;
      job.spool_dir = NodeFs::resolve(config_.state_dir, "spool/" + job.id.str());
      fs_.write(job.spool_dir + "/executable", prepared[i].program);
      if (prepared[i].input) fs_.write(job.spool_dir + "/input", *prepared[i].input);
      const auto id = job.id;
      jobs_.emplace(id, std::move(job));
      emit({now, id, std::nullopt, JobState::Idle, "owner " + owner});
      write_user_log(id, now, "000", "Job submitted from host: " + config_.host);
    }
  }
  const int count = proc;
  return {{cluster, 0}, count, fmt::format("{} job(s) submitted to cluster {}.", count, cluster)};
}

Lrm::SubmitResult Lrm::submit_grid(const jobspec::SubmitDescription& sd, const std::string& owner, Timestamp now,
                                   const std::string& iwd) {
  if (sd.universe != jobspec::Universe::Globus) {
    throw Error(Errc::NotGridUniverse, "grid records need a Globus-universe description");
  }
  const int cluster = next_cluster_++;
  JobRecord job;
  job.id = {cluster, 0};
  job.owner = owner;
  job.submitted = now;
  job.priority = sd.priority;
  job.spec = sd;
  job.spec.queue_count = 1;
  job.cmd = sd.executable;
  if (!sd.arguments.empty()) job.cmd += " " + strings::join_arguments(sd.arguments);
  job.iwd = iwd;
  job.grid = true;
  const auto id = job.id;
  jobs_.emplace(id, std::move(job));
  emit({now, id, std::nullopt, JobState::Idle, "owner " + owner + " grid"});
  write_user_log(id, now, "000", "Job submitted from host: " + config_.host);
  return {id, 1, fmt::format("1 job(s) submitted to cluster {}.", cluster)};
}

void Lrm::write_user_log(JobId id, Timestamp now, std::string_view code, std::string_view text) {
  const auto& job = get(id);
  if (job.spec.log.empty()) return;
  fs_.append(NodeFs::resolve(job.iwd, job.spec.log),
             fmt::format("{} ({}) {} {}\n", code, id.str(), format_log_stamp(now), text));
}

void Lrm::transition(JobRecord& job, JobState to, Timestamp now, std::string detail) {
  if (!is_legal_transition(job.state, to)) {
    throw Error(Errc::IllegalTransition,
                fmt::format("job {}: {} -> {} is not allowed", job.id.str(), state_name(job.state), state_name(to)));
  }
  const auto from = job.state;
  if (from == JobState::Running && job.running_since) {
    job.run_time += std::max(Duration{0}, now - *job.running_since);
    job.running_since.reset();
  }
  job.state = to;
  if (to == JobState::Running && !job.grid) job.running_since = now;
  if (is_terminal(to)) job.completed_at = now;
  emit({now, job.id, from, to, std::move(detail)});
}

void Lrm::release_slot(JobRecord& job, Timestamp now) {
  if (!job.claimed_slot) return;
  for (auto& slot : slots_) {
    if (slot.job == job.id) {
      slot.state = SlotState::Unclaimed;
      slot.activity = Activity::Idle;
      slot.entered_activity = now;
      slot.job.reset();
    }
  }
  job.claimed_slot.reset();
}

void Lrm::dispatch(JobRecord& job, SlotAd& slot, Timestamp now) {
  ExecRequest req;
  req.id = job.id;
  req.owner = job.owner;
  req.executable = job.spec.executable;
  req.program = fs_.read(job.spool_dir + "/executable").value_or("");
  req.arguments = job.spec.arguments;
  req.stdin_data = fs_.read(job.spool_dir + "/input").value_or("");
  req.slot = slot.name;
  req.now = now;

  transition(job, JobState::Running, now, slot.name);
  slot.state = SlotState::Claimed;
  slot.activity = Activity::Busy;
  slot.entered_activity = now;
  slot.job = job.id;
  job.claimed_slot = slot.name;

  job.result = executor_.execute(req);
  job.finish_at = now + std::max(Duration{0}, job.result->duration);
  write_user_log(job.id, now, "001", "Job executing on host: " + slot.name);
}

std::vector<std::pair<JobId, std::string>> Lrm::schedule_tick(Timestamp now) {
  std::vector<JobRecord*> idle;
  for (auto& [id, job] : jobs_) {
    if (job.state == JobState::Idle && !job.grid) idle.push_back(&job);
  }
  std::stable_sort(idle.begin(), idle.end(), [](const JobRecord* a, const JobRecord* b) {
    if (a->priority != b->priority) return a->priority > b->priority;
    if (a->submitted != b->submitted) return a->submitted < b->submitted;
    return a->id < b->id;
  });

  std::vector<std::pair<JobId, std::string>> assigned;
  for (auto* job : idle) {
    std::vector<classad::ClassAd> machines;
    for (const auto& slot : slots_) machines.push_back(slot.to_classad());
    const auto names = classad::matchmake(job_classad(*job), machines);
    if (names.empty()) continue;
    auto slot = std::find_if(slots_.begin(), slots_.end(), [&](const SlotAd& s) { return s.name == names.front(); });
    dispatch(*job, *slot, now);
    assigned.emplace_back(job->id, slot->name);
  }
  return assigned;
}

void Lrm::finish_run(JobRecord& job, Timestamp now) {
  const int exit_code = job.result ? job.result->exit_code : 0;
  transition(job, JobState::Completed, now, fmt::format("exit {}", exit_code));
  job.exit_code = exit_code;
  release_slot(job, now);
  job.finish_at.reset();

  const auto out = job.result ? job.result->out : std::string();
  const auto err = job.result ? job.result->err : std::string();
  if (!job.spec.output.empty()) fs_.write(NodeFs::resolve(job.iwd, job.spec.output), out);
  if (!job.spec.error.empty()) fs_.write(NodeFs::resolve(job.iwd, job.spec.error), err);
  write_user_log(job.id, now, "005", fmt::format("Job terminated. (return value {})", exit_code));
}

void Lrm::complete(JobId id, Timestamp now, int exit_code) {
  auto& job = get(id);
  if (job.state != JobState::Running || job.grid) {
    throw Error(Errc::IllegalTransition,
                fmt::format("job {}: {} -> Completed is not allowed", id.str(), state_name(job.state)));
  }
  if (!job.result) job.result = ExecResult{};
  job.result->exit_code = exit_code;
  finish_run(job, now);
}

void Lrm::remove(JobId id, Timestamp now) {
  auto& job = get(id);
  transition(job, JobState::Removed, now);
  release_slot(job, now);
  job.finish_at.reset();
}

void Lrm::hold(JobId id, Timestamp now, std::string reason) {
  auto& job = get(id);
  transition(job, JobState::Held, now, reason);
  job.hold_reason = std::move(reason);
}

void Lrm::release(JobId id, Timestamp now) {
  auto& job = get(id);
  transition(job, JobState::Idle, now);
  job.hold_reason.clear();
}

void Lrm::suspend(JobId id, Timestamp now) {
  auto& job = get(id);
  transition(job, JobState::Suspended, now);
  if (job.finish_at) {
    job.remaining = std::max(Duration{0}, *job.finish_at - now);
    job.finish_at.reset();
  }
}

void Lrm::resume(JobId id, Timestamp now) {
  auto& job = get(id);
  transition(job, JobState::Running, now);
  if (!job.grid) job.finish_at = now + job.remaining;
}

void Lrm::vacate(JobId id, Timestamp now) {
  auto& job = get(id);
  transition(job, JobState::Idle, now);
  release_slot(job, now);
  job.finish_at.reset();
  job.result.reset();
}

bool Lrm::mirror_step(JobId id, JobState target, Timestamp now, Duration remote_run_time,
                      const std::string& remote_slot, bool all_steps) {
  auto& job = get(id);
  if (!job.grid) throw Error(Errc::Usage, fmt::format("job {} is not a grid job", id.str()));
  job.run_time = std::max(job.run_time, remote_run_time);
  bool changed = false;
  for (auto next : legal_path(job.state, target)) {
    transition(job, next, now, next == JobState::Running ? remote_slot : std::string());
    if (next == JobState::Running || next == JobState::Suspended) {
      job.claimed_slot = remote_slot.empty() ? "remote" : remote_slot;
    } else {
      job.claimed_slot.reset();
    }
    changed = true;
    if (!all_steps) break;
  }
  return changed;
}

void Lrm::set_hold_reason(JobId id, std::string reason) { get(id).hold_reason = std::move(reason); }

void Lrm::set_exit_code(JobId id, int exit_code) { get(id).exit_code = exit_code; }

void Lrm::deliver_output(JobId id, std::string_view out, std::string_view err) {
  const auto& job = get(id);
  if (!job.spec.output.empty()) fs_.write(NodeFs::resolve(job.iwd, job.spec.output), out);
  if (!job.spec.error.empty()) fs_.write(NodeFs::resolve(job.iwd, job.spec.error), err);
}

void Lrm::retire(JobRecord& job) {
  HistoryRow row;
  row.id = job.id;
  row.owner = job.owner;
  row.submitted = job.submitted;
  row.run_time = job.run_time;
  row.state = job.state;
  row.completed = job.completed_at.value_or(job.submitted);
  row.cmd = job.cmd;
  row.exit_code = job.exit_code;
  fs_.append(history_path(), encode_history_row(row) + "\n");
  history_.push_back(std::move(row));
  if (!job.spool_dir.empty()) fs_.remove_all(job.spool_dir);
}

void Lrm::pump(Timestamp now) {
  for (auto& [id, job] : jobs_) {
    // Completion is stamped with the moment the run ended, not when noticed.
    if (job.state == JobState::Running && !job.grid && job.finish_at && *job.finish_at <= now) {
      finish_run(job, *job.finish_at);
    }
  }
  for (auto it = jobs_.begin(); it != jobs_.end();) {
    auto& job = it->second;
    if (is_terminal(job.state) && job.completed_at && *job.completed_at + config_.linger <= now) {
      retire(job);
      it = jobs_.erase(it);
    } else {
      ++it;
    }
  }
  schedule_tick(now);
}

QueueSnapshot Lrm::query_queue(Timestamp now) const {
  QueueSnapshot snap;
  snap.submitter = config_.host;
  snap.taken = now;
  for (const auto& [id, job] : jobs_) {
    QueueRow row;
    row.id = id;
    row.owner = job.owner;
    row.submitted = job.submitted;
    row.run_time = job.run_time + (job.running_since ? std::max(Duration{0}, now - *job.running_since) : Duration{0});
    row.state = job.state;
    row.priority = job.priority;
    row.cmd = job.display_cmd();
    row.hold_reason = job.hold_reason;
    snap.summary.count(job.state);
    snap.rows.push_back(std::move(row));
  }
  return snap;
}

std::vector<HistoryRow> Lrm::query_history() const {
  auto rows = history_;
  sort_history(rows);
  return rows;
}

}  // namespace minigrid::lrm
