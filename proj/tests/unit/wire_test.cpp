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

#include <random>

#include <gtest/gtest.h>

namespace minigrid::wire {
namespace {

TEST(WireTest, EncodesSpecShape) {
  Message m(kJobStatus);
  m.set("request-id", "r1").set("state", "PENDING");
  m.payload = "x";
  EXPECT_EQ(encode_body(m), "MINIGRID/1 JOB-STATUS\nrequest-id: r1\nstate: PENDING\n\nx");
  const auto frame = encode_frame(m);
  ASSERT_EQ(frame.size(), 4 + encode_body(m).size());
  EXPECT_EQ(frame.substr(0, 4), std::string("\0\0\0\x36", 4));
}

TEST(WireTest, ErrorMessagesCarryCodeAndDetail) {
  const auto m = make_error(Errc::FutureCertificate, "line one\nline two");
  EXPECT_EQ(m.get("code"), "FutureCertificate");
  EXPECT_EQ(m.get("detail"), "line one line two");
  try {
    raise_if_error(decode_body(encode_body(m)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::FutureCertificate);
  }
  EXPECT_NO_THROW(raise_if_error(Message(kJobStatus)));
}

TEST(WireTest, RejectsUnrepresentableHeaders) {
  Message m(kJobRequest);
  m.set("bad", "a\nb");
  EXPECT_THROW(encode_body(m), Error);
  Message k(kJobRequest);
  k.set("bad key", "v");
  EXPECT_THROW(encode_body(k), Error);
  EXPECT_THROW(decode_body("HTTP/1.1 200\n\n"), Error);
  EXPECT_THROW(decode_body("MINIGRID/1 X\nnocolon\n\n"), Error);
  EXPECT_THROW(decode_body("MINIGRID/1 X\nk: v\n"), Error);
  EXPECT_THROW(Message(kJobRequest).require("missing"), Error);
}

TEST(WireTest, SetReplacesExistingHeader) {
  Message m(kAdmin);
  m.set("k", "1").set("k", "2");
  ASSERT_EQ(m.headers.size(), 1u);
  EXPECT_EQ(m.get("k"), "2");
}

TEST(WireTest, PropertyStreamRoundTripUnderArbitrarySplits) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Message> sent;
    std::string stream;
    const int count = 1 + static_cast<int>(rng() % 5);
    for (int i = 0; i < count; ++i) {
      Message m(i % 2 ? kXferPut : kJobRequest);
      const int nh = static_cast<int>(rng() % 4);
      for (int h = 0; h < nh; ++h) m.set("h" + std::to_string(h), std::string(rng() % 20, 'v'));
      m.payload.resize(rng() % 300);
      for (auto& c : m.payload) c = static_cast<char>(rng() & 0xff);
      stream += encode_frame(m);
      sent.push_back(std::move(m));
    }
    FrameReader reader;
    std::vector<Message> got;
    std::size_t pos = 0;
    while (pos < stream.size()) {
      const auto n = std::min<std::size_t>(stream.size() - pos, 1 + rng() % 64);
      reader.feed(std::string_view(stream).substr(pos, n));
      pos += n;
      while (auto m = reader.next()) got.push_back(std::move(*m));
    }
    EXPECT_EQ(got, sent);
  }
}

TEST(WireTest, OversizedLengthIsFrameError) {
  FrameReader reader;
  reader.feed(std::string("\xff\xff\xff\xff", 4));
  EXPECT_THROW(reader.next(), Error);
}

}  // namespace
}  // namespace minigrid::wire
