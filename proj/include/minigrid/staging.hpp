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

// Per-job sandboxes on the execute side, digest-checked transfers in both
// directions, and 64 KiB chunking for the wire.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "minigrid/nodefs.hpp"

namespace minigrid::staging {

inline constexpr std::size_t kChunkSize = 64 * 1024;

std::string digest(std::string_view bytes);

struct ManifestItem {
  std::string name;
  std::uint64_t size = 0;
  std::string digest;

  bool operator==(const ManifestItem&) const = default;
};

struct Sandbox {
  std::string job_ref;
  std::string root;  // node path
  std::vector<ManifestItem> manifest;
};

/// A file arriving for a sandbox: its destination name, the content if it
/// was received, and the digest the sender claims.
struct Incoming {
  std::string name;
  std::optional<std::string> content;
  std::string digest;
};

/// A file leaving a sandbox.
struct Outgoing {
  std::string name;
  std::string content;
  std::string digest;
};

/// Destination names must stay inside the sandbox: relative, non-empty,
/// no "." or ".." components. Throws Error(PathEscape).
std::string checked_name(std::string_view name);

class SandboxStore {
 public:
  SandboxStore(NodeFs fs, std::string root);

  /// Creates the sandbox for `job_ref` holding `items`. A repeated call for
  /// the same job_ref returns the existing sandbox unchanged. Throws
  /// MissingSource, DigestMismatch or PathEscape, leaving no sandbox behind.
  Sandbox stage_in(const std::string& job_ref, const std::vector<Incoming>& items);

  std::optional<Sandbox> find(const std::string& job_ref) const;
  /// Node path of `name` inside the sandbox.
  std::string path_of(const std::string& job_ref, std::string_view name) const;
  /// Throws SandboxMissing when the sandbox is gone, MissingSource when the
  /// file is absent.
  Outgoing fetch(const std::string& job_ref, std::string_view name) const;
  /// Deletes the sandbox once the submitter confirms collection.
  void remove(const std::string& job_ref);

  const std::string& root() const { return root_; }

 private:
  std::string sandbox_root(const std::string& job_ref) const;

  NodeFs fs_;
  std::string root_;
  std::map<std::string, Sandbox> sandboxes_;
};

/// Writes a received file into `dir` after checking its digest. Throws
/// DigestMismatch or PathEscape.
void deliver(const NodeFs& fs, const std::string& dir, const Outgoing& file);

/// Splits content into 64 KiB chunks; empty content is one empty chunk.
std::vector<std::string_view> chunk(std::string_view content);

/// Reassembles chunked transfers keyed by name.
class ChunkAssembler {
 public:
  /// Returns the full content once every chunk of `name` has arrived.
  std::optional<std::string> add(const std::string& name, std::size_t index, std::size_t count, std::string data);

 private:
  struct Partial {
    std::size_t count = 0;
    std::map<std::size_t, std::string> parts;
  };
  std::map<std::string, Partial> partial_;
};

}  // namespace minigrid::staging
