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

// The framed text protocol shared by the gatekeeper, staging, the grid
// manager and the CLI: a 4-byte big-endian length, then
//
//   MINIGRID/1 <TYPE>
//   key: value
//   ...
//   <blank line>
//   <payload bytes>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "minigrid/error.hpp"

namespace minigrid::wire {

inline constexpr std::string_view kJobRequest = "JOB-REQUEST";
inline constexpr std::string_view kJobStatus = "JOB-STATUS";
inline constexpr std::string_view kJobCollect = "JOB-COLLECT";
inline constexpr std::string_view kXferPut = "XFER-PUT";
inline constexpr std::string_view kXferGet = "XFER-GET";
inline constexpr std::string_view kError = "ERROR";
// Local daemon commands used by the CLI.
inline constexpr std::string_view kLrmSubmit = "LRM-SUBMIT";
inline constexpr std::string_view kLrmQuery = "LRM-QUERY";
inline constexpr std::string_view kLrmRemove = "LRM-REMOVE";
inline constexpr std::string_view kAdmin = "ADMIN";

inline constexpr std::size_t kMaxFrame = 64u << 20;

struct Message {
  std::string type;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string payload;

  Message() = default;
  explicit Message(std::string_view t) : type(t) {}

  /// Replaces an existing header of the same name or appends one.
  Message& set(std::string_view key, std::string value);
  std::optional<std::string> get(std::string_view key) const;
  /// Throws Error(FrameError) when absent.
  std::string require(std::string_view key) const;

  bool operator==(const Message&) const = default;
};

/// The frame body (no length prefix). Throws FrameError for header keys or
/// values that cannot be represented.
std::string encode_body(const Message& m);
Message decode_body(std::string_view body);

/// Length prefix plus body.
std::string encode_frame(const Message& m);

/// Incremental decoder for a byte stream of frames.
class FrameReader {
 public:
  void feed(std::string_view bytes) { buffer_.append(bytes); }
  /// The next complete message, if buffered. Throws FrameError on an
  /// oversized length or a malformed body.
  std::optional<Message> next();

 private:
  std::string buffer_;
};

Message make_error(Errc code, std::string_view detail);
/// Throws the carried Error when `m` is an ERROR message.
void raise_if_error(const Message& m);

}  // namespace minigrid::wire
