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

// Remote job submission: LRM adapters, the gatekeeper service, and the
// client side of the protocol (submit, poll, collect, job_run).

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "minigrid/gsi.hpp"
#include "minigrid/jobspec.hpp"
#include "minigrid/lrm.hpp"
#include "minigrid/staging.hpp"
#include "minigrid/transport.hpp"
#include "minigrid/wire.hpp"

namespace minigrid::gram {

enum class GramState { Pending, Active, Done, Failed };

std::string_view to_string(GramState s);
std::optional<GramState> gram_state_from_string(std::string_view s);

/// Idle->PENDING, Running/Suspended->ACTIVE, Completed->DONE, Removed/Held->FAILED.
GramState map_state(lrm::JobState s);

struct GramJobHandle {
  jobspec::ContactString contact;
  std::string request_id;
  lrm::JobId remote_job;
  GramState gram_state = GramState::Pending;
};

struct JobStatus {
  lrm::JobState state = lrm::JobState::Idle;
  Duration run_time{0};
  int exit_code = 0;
  std::string slot;  // claimed slot while running
};

/// The per-LRM translator behind the gatekeeper.
class Adapter {
 public:
  virtual ~Adapter() = default;
  virtual const std::string& dialect() const = 0;
  virtual lrm::JobId submit(std::string_view native, const std::string& local_user, const std::string& iwd,
                            Timestamp now) = 0;
  virtual JobStatus poll(lrm::JobId id, Timestamp now) = 0;
  virtual void cancel(lrm::JobId id, Timestamp now) = 0;
  /// (stdout bytes, stderr bytes) of a finished job.
  virtual std::pair<std::string, std::string> collect(lrm::JobId id) = 0;
};

/// Drives a local Lrm through one native dialect. Two fault switches model
/// a dead jobmanager process and a dialect version mismatch.
class LrmAdapter : public Adapter {
 public:
  LrmAdapter(std::string dialect, lrm::Lrm& lrm);

  const std::string& dialect() const override { return dialect_; }
  lrm::JobId submit(std::string_view native, const std::string& local_user, const std::string& iwd,
                    Timestamp now) override;
  JobStatus poll(lrm::JobId id, Timestamp now) override;
  void cancel(lrm::JobId id, Timestamp now) override;
  std::pair<std::string, std::string> collect(lrm::JobId id) override;

  void set_killed(bool killed) { killed_ = killed; }
  bool killed() const { return killed_; }
  void set_version_mismatch(bool on) { version_mismatch_ = on; }
  bool version_mismatch() const { return version_mismatch_; }

 private:
  void ensure_alive() const;

  std::string dialect_;
  lrm::Lrm& lrm_;
  bool killed_ = false;
  bool version_mismatch_ = false;
  std::map<lrm::JobId, std::pair<std::string, std::string>> outputs_;  // stdout/stderr paths
};

struct GatekeeperConfig {
  std::string host;
  int port = 2119;
  /// jobmanager name (the contact's `<lrm>` suffix) to adapter.
  std::map<std::string, Adapter*> adapters;
  gsi::Gridmap gridmap;
  std::vector<gsi::Certificate> anchors;
  Duration max_skew = gsi::kDefaultMaxSkew;
};

class Gatekeeper {
 public:
  using Log = std::function<void(const std::string&)>;

  Gatekeeper(GatekeeperConfig config, staging::SandboxStore& sandboxes, Log log);

  /// Authenticates, authorizes, stages, translates and submits. `received`
  /// holds the files already delivered by XFER-PUT for this request.
  /// Rejections leave the LRM untouched. Repeating a request id returns the
  /// existing handle.
  GramJobHandle handle_request(const jobspec::GramJobRequest& req, std::span<const gsi::Certificate> chain,
                               Timestamp now, const std::map<std::string, std::string>& received = {});
  GramState poll_status(const std::string& request_id, Timestamp now);
  JobStatus job_status(const std::string& request_id, Timestamp now);
  /// Output files of a finished job, keyed by name ("stdout", "stderr").
  std::map<std::string, std::string> collect(const std::string& request_id);
  void confirm_collected(const std::string& request_id);

  /// Protocol entry point. Returns nullopt when no reply is sent, which is
  /// what a dead adapter looks like from the client.
  std::optional<wire::Message> handle(const wire::Message& msg, Timestamp now);

  GatekeeperConfig& config() { return config_; }

 private:
  struct Active {
    GramJobHandle handle;
    Adapter* adapter = nullptr;
    std::optional<std::map<std::string, std::string>> outputs;
  };
  Active& active(const std::string& request_id);

  GatekeeperConfig config_;
  staging::SandboxStore& sandboxes_;
  Log log_;
  std::map<std::string, Active> active_;
  std::map<std::string, staging::ChunkAssembler> assemblers_;
  std::map<std::string, std::map<std::string, std::string>> received_;
};

// ---------------------------------------------------------------------------
// Message encoding shared by the blocking client and the grid manager.

wire::Message encode_job_request(const jobspec::GramJobRequest& req, const jobspec::ContactString& contact,
                                 std::span<const gsi::Certificate> chain);
jobspec::GramJobRequest decode_job_request(const wire::Message& msg);
std::vector<gsi::Certificate> decode_chain(const wire::Message& msg);

/// XFER-PUT frames for one file, one per 64 KiB chunk.
std::vector<wire::Message> encode_puts(const std::string& request_id, const std::string& name,
                                       std::string_view content);

wire::Message status_request(const std::string& request_id);
struct StatusReply {
  lrm::JobId remote_job;
  GramState state = GramState::Pending;
  Duration run_time{0};
  int exit_code = 0;
  std::string slot;
  lrm::JobState lrm_state = lrm::JobState::Idle;
};
/// Throws the carried error for ERROR replies.
StatusReply decode_status_reply(const wire::Message& reply);

wire::Message collect_request(const std::string& request_id, bool confirm);
/// File names and digests announced by a JOB-COLLECT reply.
std::vector<std::pair<std::string, std::string>> decode_collect_reply(const wire::Message& reply);
wire::Message get_request(const std::string& request_id, const std::string& name, std::size_t chunk);

// ---------------------------------------------------------------------------
// Blocking client

struct ClientSession {
  Transport& transport;
  std::string node;  // the client's site
  NodeFs fs;
  std::string cwd;
  gsi::ProxyCredential proxy;
  gsi::SeedSource& seed;
  std::function<std::string()> next_request_id;
};

/// Stages the request's stage_in files from the client node, then submits
/// with a freshly delegated credential.
GramJobHandle submit_request(ClientSession& session, const jobspec::ContactString& contact,
                             jobspec::GramJobRequest req, Duration timeout);
StatusReply poll(ClientSession& session, const GramJobHandle& handle, Duration timeout);
/// Fetches and digest-checks every output file, then confirms collection.
std::map<std::string, std::string> collect(ClientSession& session, const GramJobHandle& handle, Duration timeout);

struct JobRunOptions {
  Duration timeout = seconds(60);
  Duration poll_interval = std::chrono::milliseconds(500);
};

struct JobRunResult {
  std::string out;
  std::string err;
  GramState state = GramState::Done;
  int exit_code = 0;
  GramJobHandle handle;
};

/// Submit, poll until DONE or FAILED, collect. The executable is a path on
/// the remote node. Throws Error(Timeout) naming the contact.
JobRunResult job_run(ClientSession& session, const jobspec::ContactString& contact, const std::string& executable,
                     const std::vector<std::string>& args, const JobRunOptions& options = {});

}  // namespace minigrid::gram
