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

#include <fmt/format.h>

#include "minigrid/error.hpp"
#include "minigrid/strings.hpp"

namespace minigrid::gram {

namespace {

constexpr std::string_view kNames[] = {"PENDING", "ACTIVE", "DONE", "FAILED"};

std::size_t parse_size(const std::string& text, std::string_view what) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw Error(Errc::FrameError, fmt::format("bad {} '{}'", what, text));
  }
}

long long parse_int(const std::string& text, std::string_view what) {
  try {
    std::size_t used = 0;
    const auto v = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::FrameError, fmt::format("bad {} '{}'", what, text));
  }
}

wire::Message status_reply(const GramJobHandle& handle, const JobStatus& status) {
  wire::Message m(wire::kJobStatus);
  m.set("request-id", handle.request_id)
      .set("job-id", handle.remote_job.str())
      .set("state", std::string(to_string(map_state(status.state))))
      .set("lrm-state", std::string(lrm::state_name(status.state)))
      .set("run-time-ms", std::to_string(status.run_time.count()))
      .set("exit-code", std::to_string(status.exit_code));
  if (!status.slot.empty()) m.set("slot", status.slot);
  return m;
}

}  // namespace

std::string_view to_string(GramState s) { return kNames[static_cast<int>(s)]; }

std::optional<GramState> gram_state_from_string(std::string_view s) {
  for (int i = 0; i < 4; ++i) {
    if (kNames[i] == s) return static_cast<GramState>(i);
  }
  return std::nullopt;
}

GramState map_state(lrm::JobState s) {
  switch (s) {
    case lrm::JobState::Idle:
      return GramState::Pending;
    case lrm::JobState::Running:
    case lrm::JobState::Suspended:
      return GramState::Active;
    case lrm::JobState::Completed:
      return GramState::Done;
    case lrm::JobState::Removed:
    case lrm::JobState::Held:
      return GramState::Failed;
  }
  return GramState::Failed;
}

// ---------------------------------------------------------------------------
// LrmAdapter

LrmAdapter::LrmAdapter(std::string dialect, lrm::Lrm& lrm) : dialect_(std::move(dialect)), lrm_(lrm) {}

void LrmAdapter::ensure_alive() const {
  if (killed_) throw Error(Errc::AdapterFailure, fmt::format("jobmanager-{} is not running", dialect_));
}

lrm::JobId LrmAdapter::submit(std::string_view native, const std::string& local_user, const std::string& iwd,
                              Timestamp now) {
  ensure_alive();
  if (version_mismatch_) {
    throw Error(Errc::VersionMismatch,
                fmt::format("jobmanager-{} does not understand this {} description version", dialect_, dialect_));
  }
  const auto job = jobspec::parse_dialect(native, dialect_);
  const auto sd = jobspec::to_submit_description(job);
  lrm::SubmitContext ctx;
  ctx.iwd = iwd;
  const auto result = lrm_.submit(std::span(&sd, 1), local_user, now, ctx);
  outputs_[result.first] = {NodeFs::resolve(iwd, sd.output), NodeFs::resolve(iwd, sd.error)};
  return result.first;
}

JobStatus LrmAdapter::poll(lrm::JobId id, Timestamp now) {
  ensure_alive();
  if (const auto* job = lrm_.find(id)) {
    JobStatus s{job->state, job->run_time, job->exit_code, job->claimed_slot.value_or("")};
    if (job->running_since) s.run_time += std::max(Duration{0}, now - *job->running_since);
    return s;
  }
  if (const auto row = lrm_.find_history(id)) return {row->state, row->run_time, row->exit_code, {}};
  throw Error(Errc::UnknownJob, fmt::format("job {} is not known to jobmanager-{}", id.str(), dialect_));
}

void LrmAdapter::cancel(lrm::JobId id, Timestamp now) {
  ensure_alive();
  lrm_.remove(id, now);
}

std::pair<std::string, std::string> LrmAdapter::collect(lrm::JobId id) {
  ensure_alive();
  auto it = outputs_.find(id);
  if (it == outputs_.end()) throw Error(Errc::UnknownJob, fmt::format("job {} has no outputs here", id.str()));
  const auto& fs = lrm_.fs();
  return {fs.read(it->second.first).value_or(""), fs.read(it->second.second).value_or("")};
}

// ---------------------------------------------------------------------------
// Gatekeeper

Gatekeeper::Gatekeeper(GatekeeperConfig config, staging::SandboxStore& sandboxes, Log log)
    : config_(std::move(config)), sandboxes_(sandboxes), log_(std::move(log)) {}

GramJobHandle Gatekeeper::handle_request(const jobspec::GramJobRequest& req, std::span<const gsi::Certificate> chain,
                                         Timestamp now, const std::map<std::string, std::string>& received) {
  if (auto it = active_.find(req.request_id); it != active_.end()) return it->second.handle;
  if (chain.empty()) throw Error(Errc::AuthFailed, "no credential presented");

  gsi::verify_chain(chain, config_.anchors, now, config_.max_skew);
  const auto& subject = chain.front().subject_dn;
  const auto local_user = config_.gridmap.lookup(subject);
  if (!local_user) {
    throw Error(Errc::NotAuthorized, fmt::format("'{}' is not in the grid-mapfile of {}", gsi::identity_dn(subject),
                                                 config_.host));
  }
  auto adapter_it = config_.adapters.find(req.target_lrm);
  if (adapter_it == config_.adapters.end()) {
    throw Error(Errc::UnknownJobmanager, fmt::format("{} has no jobmanager-{}", config_.host, req.target_lrm));
  }
  Adapter* adapter = adapter_it->second;

  std::vector<staging::Incoming> items;
  jobspec::GramJobRequest local = req;
  for (const auto& item : req.stage_in) {
    std::optional<std::string> content;
    if (auto it = received.find(item.name); it != received.end()) content = it->second;
    items.push_back({strings::basename(item.name), std::move(content), item.digest});
  }
  const auto box = sandboxes_.stage_in(req.request_id, items);
  for (const auto& item : req.stage_in) {
    if (item.name == req.executable) local.executable = box.root + "/" + strings::basename(item.name);
  }
  const auto native = jobspec::render_dialect(local, adapter->dialect());
  const auto id = adapter->submit(native, *local_user, box.root, now);

  GramJobHandle handle{{config_.host, config_.port, "jobmanager-" + req.target_lrm}, req.request_id, id,
                       GramState::Pending};
  active_[req.request_id] = Active{handle, adapter, std::nullopt};
  received_.erase(req.request_id);
  assemblers_.erase(req.request_id);
  log_(fmt::format("request {} from \"{}\" mapped to {} as job {}", req.request_id, gsi::identity_dn(subject),
                   *local_user, id.str()));
  return handle;
}

Gatekeeper::Active& Gatekeeper::active(const std::string& request_id) {
  auto it = active_.find(request_id);
  if (it == active_.end()) throw Error(Errc::UnknownRequest, fmt::format("no job for request {}", request_id));
  return it->second;
}

JobStatus Gatekeeper::job_status(const std::string& request_id, Timestamp now) {
  auto& a = active(request_id);
  const auto status = a.adapter->poll(a.handle.remote_job, now);
  a.handle.gram_state = map_state(status.state);
  return status;
}

GramState Gatekeeper::poll_status(const std::string& request_id, Timestamp now) {
  return map_state(job_status(request_id, now).state);
}

std::map<std::string, std::string> Gatekeeper::collect(const std::string& request_id) {
  auto& a = active(request_id);
  if (!a.outputs) {
    if (a.handle.gram_state != GramState::Done && a.handle.gram_state != GramState::Failed) {
      throw Error(Errc::IllegalTransition, fmt::format("request {} has not finished", request_id));
    }
    auto [out, err] = a.adapter->collect(a.handle.remote_job);
    a.outputs = std::map<std::string, std::string>{{"stderr", std::move(err)}, {"stdout", std::move(out)}};
  }
  return *a.outputs;
}

void Gatekeeper::confirm_collected(const std::string& request_id) {
  active(request_id);
  sandboxes_.remove(request_id);
  active_.erase(request_id);
  log_(fmt::format("request {} collected; sandbox removed", request_id));
}

std::optional<wire::Message> Gatekeeper::handle(const wire::Message& msg, Timestamp now) {
  try {
    if (msg.type == wire::kXferPut) {
      const auto rid = msg.require("request-id");
      const auto name = msg.require("name");
      const auto index = parse_size(msg.require("chunk"), "chunk");
      const auto count = parse_size(msg.require("chunks"), "chunk count");
      if (auto whole = assemblers_[rid].add(name, index, count, msg.payload)) received_[rid][name] = std::move(*whole);
      wire::Message reply(wire::kXferPut);
      reply.set("request-id", rid).set("name", name).set("chunk", std::to_string(index)).set("status", "ok");
      return reply;
    }
    if (msg.type == wire::kJobRequest) {
      const auto req = decode_job_request(msg);
      const auto chain = decode_chain(msg);
      const auto rit = received_.find(req.request_id);
      const auto handle = handle_request(req, chain, now, rit == received_.end() ? std::map<std::string, std::string>{}
                                                                                   : rit->second);
      return status_reply(handle, JobStatus{});
    }
    if (msg.type == wire::kJobStatus) {
      const auto rid = msg.require("request-id");
      const auto status = job_status(rid, now);
      return status_reply(active(rid).handle, status);
    }
    if (msg.type == wire::kJobCollect) {
      const auto rid = msg.require("request-id");
      wire::Message reply(wire::kJobCollect);
      reply.set("request-id", rid);
      if (msg.get("confirm") == "yes") {
        confirm_collected(rid);
        reply.set("status", "removed");
        return reply;
      }
      const auto files = collect(rid);
      reply.set("files", std::to_string(files.size()));
      int i = 0;
      for (const auto& [name, content] : files) {
        reply.set(fmt::format("file-{}", i++), fmt::format("{} {}", staging::digest(content), name));
      }
      return reply;
    }
    if (msg.type == wire::kXferGet) {
      const auto rid = msg.require("request-id");
      const auto name = msg.require("name");
      const auto index = parse_size(msg.require("chunk"), "chunk");
      const auto files = collect(rid);
      auto it = files.find(name);
      if (it == files.end()) throw Error(Errc::MissingSource, fmt::format("request {} has no output {}", rid, name));
      const auto parts = staging::chunk(it->second);
      if (index >= parts.size()) throw Error(Errc::FrameError, fmt::format("chunk {} out of range", index));
      wire::Message reply(wire::kXferGet);
      reply.set("request-id", rid)
          .set("name", name)
          .set("chunk", std::to_string(index))
          .set("chunks", std::to_string(parts.size()))
          .set("digest", staging::digest(it->second));
      reply.payload = std::string(parts[index]);
      return reply;
    }
    throw Error(Errc::FrameError, fmt::format("gatekeeper does not handle {}", msg.type));
  } catch (const Error& e) {
    if (e.code() == Errc::AdapterFailure) {
      log_(fmt::format("{} dropped: {}", msg.type, e.detail()));
      return std::nullopt;
    }
    log_(fmt::format("{} rejected: {}: {}", msg.type, to_string(e.code()), e.detail()));
    return wire::make_error(e.code(), e.detail());
  }
}

// ---------------------------------------------------------------------------
// Message encoding

wire::Message encode_job_request(const jobspec::GramJobRequest& req, const jobspec::ContactString& contact,
                                 std::span<const gsi::Certificate> chain) {
  wire::Message m(wire::kJobRequest);
  m.set("request-id", req.request_id)
      .set("contact", contact.str())
      .set("lrm", req.target_lrm)
      .set("executable", req.executable)
      .set("arguments", strings::join_arguments(req.arguments))
      .set("argument-count", std::to_string(req.arguments.size()))
      .set("stdout", req.stdout_name)
      .set("stderr", req.stderr_name)
      .set("owner-dn", req.owner_dn);
  if (req.stdin_name) m.set("stdin", *req.stdin_name);
  m.set("stage-count", std::to_string(req.stage_in.size()));
  for (std::size_t i = 0; i < req.stage_in.size(); ++i) {
    m.set(fmt::format("stage-{}", i), req.stage_in[i].digest + " " + req.stage_in[i].name);
  }
  for (const auto& cert : chain) m.payload += gsi::certificate_to_pem(cert);
  return m;
}

jobspec::GramJobRequest decode_job_request(const wire::Message& msg) {
  jobspec::GramJobRequest req;
  req.request_id = msg.require("request-id");
  req.target_lrm = msg.require("lrm");
  req.executable = msg.require("executable");
  req.arguments = strings::tokenize_arguments(msg.require("arguments"));
  if (req.arguments.size() != parse_size(msg.require("argument-count"), "argument count")) {
    throw Error(Errc::FrameError, "argument list does not match its count");
  }
  req.stdout_name = msg.require("stdout");
  req.stderr_name = msg.require("stderr");
  req.stdin_name = msg.get("stdin");
  req.owner_dn = msg.require("owner-dn");
  const auto count = parse_size(msg.require("stage-count"), "stage count");
  for (std::size_t i = 0; i < count; ++i) {
    const auto line = msg.require(fmt::format("stage-{}", i));
    const auto space = line.find(' ');
    if (space == std::string::npos) throw Error(Errc::FrameError, "malformed stage entry");
    req.stage_in.push_back({line.substr(space + 1), line.substr(0, space)});
  }
  return req;
}

std::vector<gsi::Certificate> decode_chain(const wire::Message& msg) {
  if (msg.payload.empty()) throw Error(Errc::AuthFailed, "request carries no credential");
  return gsi::certificates_from_pem(msg.payload);
}

std::vector<wire::Message> encode_puts(const std::string& request_id, const std::string& name,
                                       std::string_view content) {
  const auto parts = staging::chunk(content);
  const auto sum = staging::digest(content);
  std::vector<wire::Message> out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    wire::Message m(wire::kXferPut);
    m.set("request-id", request_id)
        .set("name", name)
        .set("digest", sum)
        .set("chunk", std::to_string(i))
        .set("chunks", std::to_string(parts.size()));
    m.payload = std::string(parts[i]);
    out.push_back(std::move(m));
  }
  return out;
}

wire::Message status_request(const std::string& request_id) {
  wire::Message m(wire::kJobStatus);
  m.set("request-id", request_id);
  return m;
}

StatusReply decode_status_reply(const wire::Message& reply) {
  wire::raise_if_error(reply);
  if (reply.type != wire::kJobStatus) throw Error(Errc::FrameError, "expected " + std::string(wire::kJobStatus));
  StatusReply s;
  s.remote_job = lrm::JobId::parse(reply.require("job-id"));
  const auto state = gram_state_from_string(reply.require("state"));
  if (!state) throw Error(Errc::FrameError, "unknown job state " + reply.require("state"));
  s.state = *state;
  s.run_time = Duration{parse_int(reply.require("run-time-ms"), "run time")};
  s.exit_code = static_cast<int>(parse_int(reply.require("exit-code"), "exit code"));
  s.slot = reply.get("slot").value_or("");
  const auto lrm_state = lrm::state_from_name(reply.require("lrm-state"));
  if (!lrm_state) throw Error(Errc::FrameError, "unknown LRM state " + reply.require("lrm-state"));
  s.lrm_state = *lrm_state;
  return s;
}

wire::Message collect_request(const std::string& request_id, bool confirm) {
  wire::Message m(wire::kJobCollect);
  m.set("request-id", request_id);
  if (confirm) m.set("confirm", "yes");
  return m;
}

std::vector<std::pair<std::string, std::string>> decode_collect_reply(const wire::Message& reply) {
  wire::raise_if_error(reply);
  std::vector<std::pair<std::string, std::string>> files;
  const auto count = parse_size(reply.require("files"), "file count");
  for (std::size_t i = 0; i < count; ++i) {
    const auto line = reply.require(fmt::format("file-{}", i));
    const auto space = line.find(' ');
    if (space == std::string::npos) throw Error(Errc::FrameError, "malformed file entry");
    files.emplace_back(line.substr(space + 1), line.substr(0, space));
  }
  return files;
}

wire::Message get_request(const std::string& request_id, const std::string& name, std::size_t chunk) {
  wire::Message m(wire::kXferGet);
  m.set("request-id", request_id).set("name", name).set("chunk", std::to_string(chunk));
  return m;
}

// ---------------------------------------------------------------------------
// Blocking client

namespace {

std::string contact_target(const jobspec::ContactString& contact) { return contact.host; }

wire::Message checked_call(ClientSession& session, const jobspec::ContactString& contact, wire::Message msg,
                           Duration timeout) {
  try {
    return session.transport.call(session.node, contact_target(contact), std::move(msg), timeout);
  } catch (const Error& e) {
    if (e.code() != Errc::Timeout) throw;
    throw Error(Errc::Timeout, fmt::format("no reply from {} ({})", contact.str(), e.detail()));
  }
}

}  // namespace

GramJobHandle submit_request(ClientSession& session, const jobspec::ContactString& contact,
                             jobspec::GramJobRequest req, Duration timeout) {
  for (auto& item : req.stage_in) {
    const auto path = NodeFs::resolve(session.cwd, item.name);
    const auto content = session.fs.read(path);
    if (!content) throw Error(Errc::MissingSource, fmt::format("cannot stage {}: no such file", path));
    item.digest = staging::digest(*content);
    for (auto& put : encode_puts(req.request_id, item.name, *content)) {
      wire::raise_if_error(checked_call(session, contact, std::move(put), timeout));
    }
  }
  const auto delegated = gsi::delegate(session.proxy, session.transport.now(session.node), session.seed);
  const auto reply = checked_call(session, contact, encode_job_request(req, contact, delegated.chain), timeout);
  const auto status = decode_status_reply(reply);
  return {contact, req.request_id, status.remote_job, status.state};
}

StatusReply poll(ClientSession& session, const GramJobHandle& handle, Duration timeout) {
  return decode_status_reply(checked_call(session, handle.contact, status_request(handle.request_id), timeout));
}

std::map<std::string, std::string> collect(ClientSession& session, const GramJobHandle& handle, Duration timeout) {
  const auto files =
      decode_collect_reply(checked_call(session, handle.contact, collect_request(handle.request_id, false), timeout));
  std::map<std::string, std::string> out;
  for (const auto& [name, digest] : files) {
    std::string content;
    std::size_t chunks = 1;
    for (std::size_t i = 0; i < chunks; ++i) {
      const auto reply = checked_call(session, handle.contact, get_request(handle.request_id, name, i), timeout);
      wire::raise_if_error(reply);
      chunks = parse_size(reply.require("chunks"), "chunk count");
      content += reply.payload;
    }
    const auto actual = staging::digest(content);
    if (actual != digest) {
      throw Error(Errc::DigestMismatch,
                  fmt::format("{} from {}: expected digest {}, received {}", name, handle.contact.str(), digest, actual));
    }
    out[name] = std::move(content);
  }
  wire::raise_if_error(checked_call(session, handle.contact, collect_request(handle.request_id, true), timeout));
  return out;
}

JobRunResult job_run(ClientSession& session, const jobspec::ContactString& contact, const std::string& executable,
                     const std::vector<std::string>& args, const JobRunOptions& options) {
  jobspec::GramJobRequest req;
  req.executable = executable;
  req.arguments = args;
  req.owner_dn = gsi::identity_dn(session.proxy.proxy_cert.subject_dn);
  req.target_lrm = contact.lrm();
  req.request_id = session.next_request_id();

  const auto start = session.transport.now(session.node);
  const auto deadline = start + options.timeout;
  auto remaining = [&] {
    const auto left = deadline - session.transport.now(session.node);
    if (left <= Duration{0}) {
      throw Error(Errc::Timeout, fmt::format("{} did not finish within {} s", contact.str(),
                                             std::chrono::duration_cast<std::chrono::seconds>(options.timeout).count()));
    }
    return left;
  };

  JobRunResult result;
  result.handle = submit_request(session, contact, req, remaining());
  for (;;) {
    session.transport.sleep(session.node, options.poll_interval);
    const auto status = poll(session, result.handle, remaining());
    if (status.state == GramState::Done || status.state == GramState::Failed) {
      result.state = status.state;
      result.exit_code = status.exit_code;
      break;
    }
  }
  if (result.state == GramState::Done) {
    auto files = collect(session, result.handle, remaining());
    result.out = std::move(files["stdout"]);
    result.err = std::move(files["stderr"]);
  }
  result.handle.gram_state = result.state;
  return result;
}

}  // namespace minigrid::gram
