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

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace minigrid {

/// A node's view of the file system: absolute POSIX paths on the node map
/// onto the host below `root`. A root of "/" is the identity mapping.
class NodeFs {
 public:
  explicit NodeFs(std::filesystem::path root = "/");

  const std::filesystem::path& root() const { return root_; }

  /// Host path for an absolute node path; lexically normalized, never
  /// escapes the root.
  std::filesystem::path host_path(std::string_view node_path) const;

  /// Resolves `path` against `dir` when relative; result is normalized.
  static std::string resolve(std::string_view dir, std::string_view path);

  bool exists(std::string_view node_path) const;
  std::optional<std::string> read(std::string_view node_path) const;
  /// Creates parent directories. Throws Error(StorageFailure).
  void write(std::string_view node_path, std::string_view content) const;
  void append(std::string_view node_path, std::string_view content) const;
  void make_dirs(std::string_view node_path) const;
  void remove_all(std::string_view node_path) const;

 private:
  std::filesystem::path root_;
};

}  // namespace minigrid
