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

#include "minigrid/staging.hpp"

#include <filesystem>

#include <fmt/format.h>

#include "minigrid/codec.hpp"
#include "minigrid/error.hpp"

namespace minigrid::staging {

std::string digest(std::string_view bytes) { return codec::sha256_hex(bytes); }

std::string checked_name(std::string_view name) {
  if (name.empty()) throw Error(Errc::PathEscape, "empty file name");
  const std::filesystem::path p(name);
  if (p.is_absolute()) throw Error(Errc::PathEscape, fmt::format("'{}' is an absolute path", name));
  for (const auto& part : p) {
    if (part == ".." || part == "." || part.empty()) {
      throw Error(Errc::PathEscape, fmt::format("'{}' leaves the sandbox", name));
    }
  }
  return p.generic_string();
}

SandboxStore::SandboxStore(NodeFs fs, std::string root) : fs_(std::move(fs)), root_(std::move(root)) {}

std::string SandboxStore::sandbox_root(const std::string& job_ref) const {
  return root_ + "/" + checked_name(job_ref);
}

Sandbox SandboxStore::stage_in(const std::string& job_ref, const std::vector<Incoming>& items) {
  if (auto it = sandboxes_.find(job_ref); it != sandboxes_.end()) return it->second;

  Sandbox box;
  box.job_ref = job_ref;
  box.root = sandbox_root(job_ref);
  // Validate everything before touching the disk.
  std::vector<std::string> names;
  for (const auto& item : items) {
    names.push_back(checked_name(item.name));
    if (!item.content) throw Error(Errc::MissingSource, fmt::format("no data received for {}", item.name));
    const auto actual = digest(*item.content);
    if (actual != item.digest) {
      throw Error(Errc::DigestMismatch,
                  fmt::format("{}: expected digest {}, received {}", item.name, item.digest, actual));
    }
  }
  fs_.make_dirs(box.root);
  for (std::size_t i = 0; i < items.size(); ++i) {
    fs_.write(box.root + "/" + names[i], *items[i].content);
    box.manifest.push_back({names[i], items[i].content->size(), items[i].digest});
  }
  sandboxes_.emplace(job_ref, box);
  return box;
}

std::optional<Sandbox> SandboxStore::find(const std::string& job_ref) const {
  auto it = sandboxes_.find(job_ref);
  if (it == sandboxes_.end()) return std::nullopt;
  return it->second;
}

std::string SandboxStore::path_of(const std::string& job_ref, std::string_view name) const {
  return sandbox_root(job_ref) + "/" + checked_name(name);
}

Outgoing SandboxStore::fetch(const std::string& job_ref, std::string_view name) const {
  if (!sandboxes_.count(job_ref)) throw Error(Errc::SandboxMissing, fmt::format("no sandbox for {}", job_ref));
  auto content = fs_.read(path_of(job_ref, name));
  if (!content) throw Error(Errc::MissingSource, fmt::format("{} has no file {}", job_ref, name));
  Outgoing out{std::string(name), std::move(*content), {}};
  out.digest = digest(out.content);
  return out;
}

void SandboxStore::remove(const std::string& job_ref) {
  if (sandboxes_.erase(job_ref) > 0) fs_.remove_all(sandbox_root(job_ref));
}

void deliver(const NodeFs& fs, const std::string& dir, const Outgoing& file) {
  const auto name = checked_name(file.name);
  const auto actual = digest(file.content);
  if (actual != file.digest) {
    throw Error(Errc::DigestMismatch, fmt::format("{}: expected digest {}, received {}", file.name, file.digest, actual));
  }
  fs.write(NodeFs::resolve(dir, name), file.content);
}

std::vector<std::string_view> chunk(std::string_view content) {
  std::vector<std::string_view> out;
  for (std::size_t i = 0; i < content.size(); i += kChunkSize) out.push_back(content.substr(i, kChunkSize));
  if (out.empty()) out.push_back(content);
  return out;
}

std::optional<std::string> ChunkAssembler::add(const std::string& name, std::size_t index, std::size_t count,
                                               std::string data) {
  if (count == 0 || index >= count) throw Error(Errc::FrameError, fmt::format("bad chunk {}/{} for {}", index, count, name));
  auto& partial = partial_[name];
  if (partial.count != count) {
    partial = Partial{};
    partial.count = count;
  }
  partial.parts[index] = std::move(data);
  if (partial.parts.size() < count) return std::nullopt;
  std::string whole;
  for (auto& [i, part] : partial.parts) whole += part;
  partial_.erase(name);
  return whole;
}

}  // namespace minigrid::staging
