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

#include "minigrid/wire.hpp"

#include <fmt/format.h>

namespace minigrid::wire {

namespace {
constexpr std::string_view kMagic = "MINIGRID/1 ";

bool valid_token(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c == ':' || c == '\n' || c == '\r' || c == ' ') return false;
  }
  return true;
}
}  // namespace

Message& Message::set(std::string_view key, std::string value) {
  for (auto& [k, v] : headers) {
    if (k == key) {
      v = std::move(value);
      return *this;
    }
  }
  headers.emplace_back(std::string(key), std::move(value));
  return *this;
}

std::optional<std::string> Message::get(std::string_view key) const {
  for (const auto& [k, v] : headers) {
    if (k == key) return v;
  }
  return std::nullopt;
}

std::string Message::require(std::string_view key) const {
  auto v = get(key);
  if (!v) throw Error(Errc::FrameError, fmt::format("{} message lacks header '{}'", type, key));
  return *v;
}

std::string encode_body(const Message& m) {
  if (!valid_token(m.type)) throw Error(Errc::FrameError, "invalid message type");
  std::string out = std::string(kMagic) + m.type + "\n";
  for (const auto& [k, v] : m.headers) {
    if (!valid_token(k)) throw Error(Errc::FrameError, fmt::format("invalid header name '{}'", k));
    if (v.find_first_of("\r\n") != std::string::npos) {
      throw Error(Errc::FrameError, fmt::format("header '{}' value contains a line break", k));
    }
    out += k + ": " + v + "\n";
  }
  out += "\n";
  out += m.payload;
  return out;
}

Message decode_body(std::string_view body) {
  auto line_end = body.find('\n');
  if (line_end == std::string_view::npos || body.substr(0, kMagic.size()) != kMagic) {
    throw Error(Errc::FrameError, "missing protocol line");
  }
  Message m;
  m.type = std::string(body.substr(kMagic.size(), line_end - kMagic.size()));
  if (!valid_token(m.type)) throw Error(Errc::FrameError, "invalid message type");
  std::size_t pos = line_end + 1;
  while (true) {
    line_end = body.find('\n', pos);
    if (line_end == std::string_view::npos) throw Error(Errc::FrameError, "unterminated headers");
    const auto line = body.substr(pos, line_end - pos);
    pos = line_end + 1;
    if (line.empty()) break;
    const auto colon = line.find(": ");
    if (colon == std::string_view::npos || !valid_token(line.substr(0, colon))) {
      throw Error(Errc::FrameError, fmt::format("malformed header line '{}'", line));
    }
    m.headers.emplace_back(std::string(line.substr(0, colon)), std::string(line.substr(colon + 2)));
  }
  m.payload = std::string(body.substr(pos));
  return m;
}

std::string encode_frame(const Message& m) {
  const auto body = encode_body(m);
  if (body.size() > kMaxFrame) throw Error(Errc::FrameError, "frame too large");
  const auto n = static_cast<std::uint32_t>(body.size());
  std::string out;
  out.reserve(4 + body.size());
  for (int shift = 24; shift >= 0; shift -= 8) out += static_cast<char>((n >> shift) & 0xff);
  out += body;
  return out;
}

std::optional<Message> FrameReader::next() {
  if (buffer_.size() < 4) return std::nullopt;
  std::uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n = (n << 8) | static_cast<unsigned char>(buffer_[i]);
  if (n > kMaxFrame) throw Error(Errc::FrameError, fmt::format("frame length {} exceeds limit", n));
  if (buffer_.size() < 4 + std::size_t{n}) return std::nullopt;
  auto m = decode_body(std::string_view(buffer_).substr(4, n));
  buffer_.erase(0, 4 + std::size_t{n});
  return m;
}

Message make_error(Errc code, std::string_view detail) {
  Message m(kError);
  std::string flat(detail);
  for (auto& c : flat) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  m.set("code", std::string(to_string(code)));
  m.set("detail", std::move(flat));
  return m;
}

void raise_if_error(const Message& m) {
  if (m.type != kError) return;
  throw Error(errc_from_string(m.get("code").value_or("FrameError")), m.get("detail").value_or(""));
}

}  // namespace minigrid::wire
