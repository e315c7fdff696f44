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

// The grid manager: carries Globus-universe records of the local queue to a
// remote gatekeeper and mirrors the remote state back, one step per tick.

#include <functional>
#include <map>
#include <optional>
#include <string>

#include "minigrid/gram.hpp"
#include "minigrid/gsi.hpp"
#include "minigrid/jobspec.hpp"
#include "minigrid/lrm.hpp"
#include "minigrid/nodefs.hpp"
#include "minigrid/transport.hpp"

namespace minigrid::gridq {

inline constexpr int kMaxFailures = 5;
inline constexpr Duration kTickInterval = seconds(2);

enum class Phase { Staging, Tracking, Collecting, Finished };

std::string_view to_string(Phase p);

/// The local state a remote report moves a grid record toward. Remote DONE
/// maps to Running because Completed is only reached after collection.
lrm::JobState mirror_target(gram::GramState remote);

struct GridManagerConfig {
  std::string node;  // site name used on the transport
  std::string host;  // head host, used in request ids
  std::string home_root = "/home";
  int max_failures = kMaxFailures;
};

/// What the grid manager knows about one grid record.
struct Tracked {
  lrm::JobId id;
  Phase phase = Phase::Staging;
  jobspec::ContactString contact;
  jobspec::GramJobRequest request;
  std::optional<lrm::JobId> remote;
  std::optional<gram::StatusReply> last;
  int failures = 0;              // consecutive unanswered exchanges
  std::uint64_t generation = 0;  // replies from older exchanges are ignored
  bool awaiting = false;
  std::map<std::string, std::string> fetched;
};

class GridManager {
 public:
  using Log = std::function<void(const std::string&)>;

  GridManager(GridManagerConfig config, lrm::Lrm& lrm, NodeFs fs, Transport& transport, gsi::SeedSource& seed,
              Log log);

  /// Queues one Globus-universe description as a local grid record.
  lrm::Lrm::SubmitResult submit(const jobspec::SubmitDescription& sd, const std::string& owner,
                                const std::string& iwd, Timestamp now);

  /// Advances every record by at most one exchange and one mirror step.
  void tick(Timestamp now);

  const Tracked* tracked(lrm::JobId id) const;
  std::string request_id_for(lrm::JobId id) const;

 private:
  void start_exchange(Tracked& t, Timestamp now);
  void stage_and_request(Tracked& t, const std::string& owner);
  void on_status(lrm::JobId id, std::uint64_t gen, const wire::Message& reply);
  void collect(Tracked& t);
  void fetch_next(lrm::JobId id, std::uint64_t gen, std::vector<std::pair<std::string, std::string>> files,
                  std::size_t index, std::size_t chunk, std::string partial);
  void finish_collection(lrm::JobId id, std::uint64_t gen,
                         const std::vector<std::pair<std::string, std::string>>& files);
  void hold(Tracked& t, Timestamp now, const std::string& reason);
  /// Runs `fn` for a reply still relevant to record `id`; errors hold the job.
  void with_reply(lrm::JobId id, std::uint64_t gen, const wire::Message& reply,
                  const std::function<void(Tracked&)>& fn);
  Timestamp now() const;

  GridManagerConfig config_;
  lrm::Lrm& lrm_;
  NodeFs fs_;
  Transport& transport_;
  gsi::SeedSource& seed_;
  Log log_;
  std::map<lrm::JobId, Tracked> tracked_;
};

}  // namespace minigrid::gridq
