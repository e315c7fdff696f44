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

#include <random>

#include <gtest/gtest.h>

#include "minigrid/error.hpp"
#include "test_support.hpp"

namespace minigrid::staging {
namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return Errc::Usage;
}

Incoming item(std::string name, std::string content) {
  auto d = digest(content);
  return {std::move(name), std::move(content), std::move(d)};
}

struct StagingTest : ::testing::Test {
  testing::TempDir dir;
  NodeFs fs{dir.path()};
  SandboxStore store{fs, "/var/sandbox"};
};

TEST(DigestTest, KnownSha256) {
  EXPECT_EQ(digest(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(digest("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_F(StagingTest, ExecutableOnlyAndWithInput) {
  const auto one = store.stage_in("r1", {item("date", "#!minigrid-task date\n")});
  EXPECT_EQ(one.manifest.size(), 1u);
  EXPECT_EQ(fs.read(store.path_of("r1", "date")), "#!minigrid-task date\n");
  const auto two = store.stage_in("r2", {item("cat", "#!minigrid-task cat\n"), item("in.txt", "hello")});
  EXPECT_EQ(two.manifest.size(), 2u);
  EXPECT_EQ(two.manifest[1], (ManifestItem{"in.txt", 5, digest("hello")}));
}

TEST_F(StagingTest, CorruptedPayloadIsDigestMismatchAndLeavesNothing) {
  auto bad = item("date", "#!minigrid-task date\n");
  bad.content->front() ^= 0x20;
  EXPECT_EQ(code_of([&] { store.stage_in("r1", {bad}); }), Errc::DigestMismatch);
  EXPECT_FALSE(store.find("r1"));
  EXPECT_FALSE(fs.exists("/var/sandbox/r1"));
}

TEST_F(StagingTest, MissingContentIsMissingSource) {
  Incoming lost{"date", std::nullopt, digest("x")};
  EXPECT_EQ(code_of([&] { store.stage_in("r1", {lost}); }), Errc::MissingSource);
}

TEST_F(StagingTest, IdempotentPerRequest) {
  const auto first = store.stage_in("r1", {item("date", "A")});
  const auto again = store.stage_in("r1", {item("date", "B")});
  EXPECT_EQ(again.manifest, first.manifest);
  EXPECT_EQ(fs.read(store.path_of("r1", "date")), "A");
}

TEST_F(StagingTest, PathTraversalRejected) {
  for (const char* name : {"../x", "a/../../x", "/etc/passwd", "..", "./x", ""}) {
    EXPECT_EQ(code_of([&] { store.stage_in("r1", {item(name, "x")}); }), Errc::PathEscape) << name;
  }
  EXPECT_EQ(code_of([&] { store.stage_in("../r", {item("x", "x")}); }), Errc::PathEscape);
  EXPECT_NO_THROW(store.stage_in("r2", {item("sub/x", "x")}));
}

TEST_F(StagingTest, FetchAndRemove) {
  store.stage_in("r1", {item("date", "A")});
  fs.write(store.path_of("r1", "stderr"), "");
  const auto err = store.fetch("r1", "stderr");
  EXPECT_EQ(err.content, "");
  EXPECT_EQ(err.digest, digest(""));
  EXPECT_EQ(code_of([&] { store.fetch("r1", "nothing"); }), Errc::MissingSource);
  store.remove("r1");
  EXPECT_FALSE(fs.exists("/var/sandbox/r1"));
  EXPECT_EQ(code_of([&] { store.fetch("r1", "stderr"); }), Errc::SandboxMissing);
}

TEST_F(StagingTest, DeliverChecksDigestAndCreatesEmptyFiles) {
  deliver(fs, "/home/u", {"result.err", "", digest("")});
  EXPECT_EQ(fs.read("/home/u/result.err"), "");
  EXPECT_EQ(code_of([&] { deliver(fs, "/home/u", {"result.out", "x", digest("y")}); }), Errc::DigestMismatch);
  EXPECT_EQ(code_of([&] { deliver(fs, "/home/u", {"../out", "x", digest("x")}); }), Errc::PathEscape);
}

TEST(ChunkTest, SizesAndReassembly) {
  EXPECT_EQ(chunk("").size(), 1u);
  EXPECT_EQ(chunk(std::string(kChunkSize, 'a')).size(), 1u);
  EXPECT_EQ(chunk(std::string(kChunkSize + 1, 'a')).size(), 2u);

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::string content(rng() % (3 * kChunkSize + 10), '\0');
    for (auto& c : content) c = static_cast<char>(rng() & 0xff);
    auto parts = chunk(content);
    std::vector<std::size_t> order(parts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    ChunkAssembler assembler;
    std::optional<std::string> whole;
    for (std::size_t k = 0; k < order.size(); ++k) {
      whole = assembler.add("f", order[k], parts.size(), std::string(parts[order[k]]));
      if (k + 1 < order.size()) EXPECT_FALSE(whole);
    }
    ASSERT_TRUE(whole);
    EXPECT_EQ(digest(*whole), digest(content));
  }
}

TEST_F(StagingTest, PropertyByteIdentityBothDirections) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    std::string content(rng() % 5000, '\0');
    for (auto& c : content) c = static_cast<char>(rng() & 0xff);
    const auto ref = "t" + std::to_string(trial);
    store.stage_in(ref, {item("payload", content)});
    const auto out = store.fetch(ref, "payload");
    deliver(fs, "/home/back", out);
    EXPECT_EQ(digest(*fs.read("/home/back/payload")), digest(content));
  }
}

}  // namespace
}  // namespace minigrid::staging
