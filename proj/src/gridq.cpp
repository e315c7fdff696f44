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

#include <memory>

#include <fmt/format.h>

#include "minigrid/error.hpp"
#include "minigrid/staging.hpp"

namespace minigrid::gridq {

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Staging:
      return "staging";
    case Phase::Tracking:
      return "tracking";
    case Phase::Collecting:
      return "collecting";
    case Phase::Finished:
      return "finished";
  }
  return "finished";
}

lrm::JobState mirror_target(gram::GramState remote) {
  switch (remote) {
    case gram::GramState::Pending:
      return lrm::JobState::Idle;
    case gram::GramState::Active:
    case gram::GramState::Done:
      return lrm::JobState::Running;
    case gram::GramState::Failed:
      return lrm::JobState::Held;
  }
  return lrm::JobState::Held;
}

GridManager::GridManager(GridManagerConfig config, lrm::Lrm& lrm, NodeFs fs, Transport& transport,
                         gsi::SeedSource& seed, Log log)
    : config_(std::move(config)), lrm_(lrm), fs_(std::move(fs)), transport_(transport), seed_(seed),
      log_(std::move(log)) {}

Timestamp GridManager::now() const { return transport_.now(config_.node); }

std::string GridManager::request_id_for(lrm::JobId id) const { return config_.host + "-" + id.str(); }

const Tracked* GridManager::tracked(lrm::JobId id) const {
  auto it = tracked_.find(id);
  return it == tracked_.end() ? nullptr : &it->second;
}

lrm::Lrm::SubmitResult GridManager::submit(const jobspec::SubmitDescription& sd, const std::string& owner,
                                           const std::string& iwd, Timestamp now) {
  auto [contact, request] = jobspec::to_gram_request(sd, "", "pending");
  const auto result = lrm_.submit_grid(sd, owner, now, iwd);
  request.request_id = request_id_for(result.first);
  Tracked t;
  t.id = result.first;
  t.contact = contact;
  t.request = std::move(request);
  auto& entry = tracked_[t.id] = std::move(t);
  log_(fmt::format("job {} queued for {}", entry.id.str(), entry.contact.str()));

  // Without a proxy nothing can be delegated; hold right away.
  try {
    gsi::load_proxy(fs_, {config_.home_root + "/" + owner + "/.globus"});
  } catch (const Error& e) {
    hold(entry, now, fmt::format("{}: {} ({})", to_string(e.code()), e.detail(), remediation_for(e.code())));
  }
  return result;
}

void GridManager::tick(Timestamp now) {
  for (auto it = tracked_.begin(); it != tracked_.end();) {
    if (!lrm_.find(it->first)) {
      it = tracked_.erase(it);
    } else {
      ++it;
    }
  }
  std::vector<lrm::JobId> ids;
  for (const auto& [id, t] : tracked_) ids.push_back(id);
  for (const auto id : ids) {
    auto it = tracked_.find(id);
    if (it == tracked_.end()) continue;
    auto& t = it->second;
    const auto* job = lrm_.find(id);
    if (t.phase == Phase::Finished) continue;
    if (lrm::is_terminal(job->state) || job->state == lrm::JobState::Held) {
      t.phase = Phase::Finished;
      continue;
    }
    if (t.awaiting) {
      ++t.failures;
      log_(fmt::format("job {}: no answer from {} ({} of {})", id.str(), t.contact.str(), t.failures,
                       config_.max_failures));
      if (t.failures >= config_.max_failures) {
        hold(t, now, fmt::format("remote contact lost: {} did not answer {} consecutive requests", t.contact.str(),
                                 t.failures));
        continue;
      }
    }
    start_exchange(t, now);
  }
}

void GridManager::start_exchange(Tracked& t, Timestamp) {
  ++t.generation;
  t.awaiting = true;
  const auto* job = lrm_.find(t.id);
  switch (t.phase) {
    case Phase::Staging:
      stage_and_request(t, job->owner);
      break;
    case Phase::Tracking: {
      const auto id = t.id;
      const auto gen = t.generation;
      transport_.post(config_.node, t.contact.host, gram::status_request(t.request.request_id),
                      [this, id, gen](const wire::Message& reply) { on_status(id, gen, reply); });
      break;
    }
    case Phase::Collecting:
      collect(t);
      break;
    case Phase::Finished:
      t.awaiting = false;
      break;
  }
}

void GridManager::stage_and_request(Tracked& t, const std::string& owner) {
  const auto* job = lrm_.find(t.id);
  gsi::ProxyCredential proxy;
  try {
    proxy = gsi::load_proxy(fs_, {config_.home_root + "/" + owner + "/.globus"});
  } catch (const Error& e) {
    hold(t, now(), fmt::format("{}: {} ({})", to_string(e.code()), e.detail(), remediation_for(e.code())));
    return;
  }

  auto messages = std::make_shared<std::vector<wire::Message>>();
  auto req = t.request;
  req.owner_dn = gsi::identity_dn(proxy.proxy_cert.subject_dn);
  for (auto& item : req.stage_in) {
    const auto content = fs_.read(NodeFs::resolve(job->iwd, item.name));
    if (!content) {
      hold(t, now(), fmt::format("MissingSource: cannot stage {}", item.name));
      return;
    }
    item.digest = staging::digest(*content);
    for (auto& put : gram::encode_puts(req.request_id, item.name, *content)) messages->push_back(std::move(put));
  }
  const auto delegated = gsi::delegate(proxy, now(), seed_);
  messages->push_back(gram::encode_job_request(req, t.contact, delegated.chain));

  const auto id = t.id;
  const auto gen = t.generation;
  const auto host = t.contact.host;
  // Sends each message after the previous one is acknowledged. Pending
  // replies own the sender; the sender only refers to itself weakly.
  auto send = std::make_shared<std::function<void(std::size_t)>>();
  std::weak_ptr<std::function<void(std::size_t)>> weak = send;
  *send = [this, id, gen, host, messages, weak](std::size_t index) {
    auto self = weak.lock();
    transport_.post(config_.node, host, (*messages)[index],
                    [this, id, gen, index, messages, self](const wire::Message& reply) {
                      with_reply(id, gen, reply, [&](Tracked& t) {
                        wire::raise_if_error(reply);
                        if (index + 1 < messages->size()) {
                          (*self)(index + 1);
                          return;
                        }
                        const auto status = gram::decode_status_reply(reply);
                        t.remote = status.remote_job;
                        t.phase = Phase::Tracking;
                        t.awaiting = false;
                        t.failures = 0;
                        log_(fmt::format("job {} accepted by {} as {}", id.str(), t.contact.str(),
                                         status.remote_job.str()));
                      });
                    });
  };
  (*send)(0);
}

void GridManager::on_status(lrm::JobId id, std::uint64_t gen, const wire::Message& reply) {
  with_reply(id, gen, reply, [&](Tracked& t) {
    const auto status = gram::decode_status_reply(reply);
    t.last = status;
    t.awaiting = false;
    t.failures = 0;
    const auto at = now();
    if (status.state == gram::GramState::Failed) {
      hold(t, at, fmt::format("remote job {} is {} at {}", status.remote_job.str(), lrm::state_name(status.lrm_state),
                              t.contact.str()));
      return;
    }
    const auto before = lrm_.find(id)->state;
    lrm_.mirror_step(id, mirror_target(status.state), at, status.run_time, status.slot);
    const auto after = lrm_.find(id)->state;
    if (before != lrm::JobState::Running && after == lrm::JobState::Running) {
      lrm_.write_user_log(id, at, "001", "Job executing on host: " + t.contact.host);
    }
    if (status.state == gram::GramState::Done && after == lrm::JobState::Running && before == after) {
      t.phase = Phase::Collecting;
    }
  });
}

void GridManager::collect(Tracked& t) {
  const auto id = t.id;
  const auto gen = t.generation;
  t.fetched.clear();
  transport_.post(config_.node, t.contact.host, gram::collect_request(t.request.request_id, false),
                  [this, id, gen](const wire::Message& reply) {
                    with_reply(id, gen, reply, [&](Tracked&) {
                      fetch_next(id, gen, gram::decode_collect_reply(reply), 0, 0, {});
                    });
                  });
}

void GridManager::fetch_next(lrm::JobId id, std::uint64_t gen,
                             std::vector<std::pair<std::string, std::string>> files, std::size_t index,
                             std::size_t chunk, std::string partial) {
  if (index == files.size()) {
    finish_collection(id, gen, files);
    return;
  }
  const auto& t = tracked_.at(id);
  const auto name = files[index].first;
  transport_.post(config_.node, t.contact.host, gram::get_request(t.request.request_id, name, chunk),
                  [this, id, gen, files = std::move(files), index, chunk, partial = std::move(partial),
                   name](const wire::Message& reply) mutable {
                    with_reply(id, gen, reply, [&](Tracked& t) {
                      wire::raise_if_error(reply);
                      partial += reply.payload;
                      const auto chunks = std::stoull(reply.require("chunks"));
                      if (chunk + 1 < chunks) {
                        fetch_next(id, gen, std::move(files), index, chunk + 1, std::move(partial));
                      } else {
                        t.fetched[name] = std::move(partial);
                        fetch_next(id, gen, std::move(files), index + 1, 0, {});
                      }
                    });
                  });
}

void GridManager::finish_collection(lrm::JobId id, std::uint64_t gen,
                                    const std::vector<std::pair<std::string, std::string>>& files) {
  auto& t = tracked_.at(id);
  if (t.generation != gen) return;
  const auto at = now();
  for (const auto& [name, digest] : files) {
    const auto actual = staging::digest(t.fetched[name]);
    if (actual != digest) {
      hold(t, at, fmt::format("DigestMismatch: {} from {}: expected digest {}, received {}", name, t.contact.str(),
                              digest, actual));
      return;
    }
  }
  try {
    lrm_.deliver_output(id, t.fetched["stdout"], t.fetched["stderr"]);
  } catch (const Error& e) {
    hold(t, at, fmt::format("{}: {}", to_string(e.code()), e.detail()));
    return;
  }
  transport_.post(config_.node, t.contact.host, gram::collect_request(t.request.request_id, true),
                  [](const wire::Message&) {});
  const auto exit_code = t.last ? t.last->exit_code : 0;
  lrm_.set_exit_code(id, exit_code);
  lrm_.mirror_step(id, lrm::JobState::Completed, at, t.last ? t.last->run_time : Duration{0});
  lrm_.write_user_log(id, at, "005", fmt::format("Job terminated. (return value {})", exit_code));
  t.phase = Phase::Finished;
  t.awaiting = false;
  t.failures = 0;
  log_(fmt::format("job {} completed at {}; output delivered", id.str(), t.contact.str()));
}

void GridManager::hold(Tracked& t, Timestamp now, const std::string& reason) {
  t.phase = Phase::Finished;
  t.awaiting = false;
  const auto* job = lrm_.find(t.id);
  if (!job || lrm::is_terminal(job->state) || job->state == lrm::JobState::Held) return;
  if (job->state == lrm::JobState::Idle) {
    lrm_.hold(t.id, now, reason);
  } else {
    lrm_.mirror_step(t.id, lrm::JobState::Held, now, Duration{0}, {}, true);
    lrm_.set_hold_reason(t.id, reason);
  }
  log_(fmt::format("job {} held: {}", t.id.str(), reason));
}

void GridManager::with_reply(lrm::JobId id, std::uint64_t gen, const wire::Message& reply,
                             const std::function<void(Tracked&)>& fn) {
  auto it = tracked_.find(id);
  if (it == tracked_.end() || it->second.generation != gen || it->second.phase == Phase::Finished) return;
  auto& t = it->second;
  try {
    fn(t);
  } catch (const Error& e) {
    hold(t, now(), fmt::format("{}: {}", to_string(e.code()), e.detail()));
  } catch (const std::exception& e) {
    hold(t, now(), fmt::format("FrameError: {}", e.what()));
  }
  (void)reply;
}

}  // namespace minigrid::gridq
