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

#include "minigrid/nodefs.hpp"

#include <fstream>
#include <iterator>
#include <system_error>

#include "minigrid/error.hpp"

namespace minigrid {

namespace fs = std::filesystem;

NodeFs::NodeFs(fs::path root) : root_(std::move(root)) {}

std::string NodeFs::resolve(std::string_view dir, std::string_view path) {
  fs::path p(path);
  if (p.is_relative()) p = fs::path(dir.empty() ? "/" : dir) / p;
  auto normal = p.lexically_normal().generic_string();
  if (normal.size() > 1 && normal.back() == '/') normal.pop_back();
  return normal;
}

fs::path NodeFs::host_path(std::string_view node_path) const {
  // Normalizing from "/" clamps any leading ".." at the root.
  auto relative = fs::path(resolve("/", node_path)).relative_path();
  return root_ / relative;
}

bool NodeFs::exists(std::string_view node_path) const {
  std::error_code ec;
  return fs::exists(host_path(node_path), ec);
}

std::optional<std::string> NodeFs::read(std::string_view node_path) const {
  const auto path = host_path(node_path);
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) return std::nullopt;
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void NodeFs::write(std::string_view node_path, std::string_view content) const {
  const auto path = host_path(node_path);
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(Errc::StorageFailure, "cannot write " + std::string(node_path));
}

void NodeFs::append(std::string_view node_path, std::string_view content) const {
  const auto path = host_path(node_path);
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::app);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(Errc::StorageFailure, "cannot append to " + std::string(node_path));
}

void NodeFs::make_dirs(std::string_view node_path) const {
  std::error_code ec;
  fs::create_directories(host_path(node_path), ec);
  if (ec) throw Error(Errc::StorageFailure, "cannot create " + std::string(node_path) + ": " + ec.message());
}

void NodeFs::remove_all(std::string_view node_path) const {
  std::error_code ec;
  fs::remove_all(host_path(node_path), ec);
}

}  // namespace minigrid
