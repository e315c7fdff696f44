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

#include <charconv>

#include <fmt/format.h>

#include "minigrid/cli.hpp"
#include "minigrid/error.hpp"
#include "minigrid/strings.hpp"
#include "minigrid/testbed.hpp"

namespace minigrid::testbed {

namespace {

struct Actor {
  std::string user;
  std::string site;
};

class ScenarioRunner {
 public:
  explicit ScenarioRunner(Testbed& testbed) : testbed_(testbed) {}

  std::string run(std::string_view script) {
    const auto lines = strings::split_lines(script);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      step_ = i + 1;
      const auto line = strings::trim(lines[i]);
      if (line.empty() || line.front() == '#') continue;
      const auto space = line.find(' ');
      const auto verb = line.substr(0, space);
      const auto rest = space == std::string_view::npos ? std::string_view{} : strings::trim(line.substr(space));
      if (verb == "at") {
        at(rest);
      } else if (verb == "expect") {
        expect(rest);
      } else if (verb == "expect-exit") {
        if (last_status_ != number(rest)) {
          fail(fmt::format("expected exit {} but the command exited {}", rest, last_status_));
        }
      } else if (verb == "advance") {
        testbed_.advance(seconds(number(rest)));
      } else if (verb == "write") {
        std::size_t end = i + 1;
        while (end < lines.size() && strings::trim(lines[end]) != "end") ++end;
        if (end == lines.size()) fail("write block has no closing 'end'");
        write(rest, std::vector<std::string>(lines.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                                             lines.begin() + static_cast<std::ptrdiff_t>(end)));
        i = end;
      } else {
        fail(fmt::format("unknown directive '{}'", verb));
      }
    }
    return transcript_;
  }

 private:
  [[noreturn]] void fail(std::string_view why) const {
    throw Error(Errc::ScriptError, fmt::format("step {}: {}", step_, why));
  }

  long long number(std::string_view text) const {
    long long v = 0;
    const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || r.ec != std::errc{} || r.ptr != text.data() + text.size()) {
      fail(fmt::format("'{}' is not a number", text));
    }
    return v;
  }

  Actor actor(std::string_view text) const {
    const auto at = text.find('@');
    if (at == std::string_view::npos || at == 0) fail(fmt::format("expected <user>@<site>, got '{}'", text));
    Actor a{std::string(text.substr(0, at)), std::string(text.substr(at + 1))};
    try {
      a.site = testbed_.site(a.site).spec().name;
    } catch (const Error& e) {
      fail(e.detail());
    }
    return a;
  }

  std::string prompt(const Actor& a) const { return fmt::format("{}@{}:~$ ", a.user, a.site); }

  void at(std::string_view rest) {
    const auto fields = strings::split_ws(rest);
    if (fields.size() < 3) fail("expected: at <seconds> <user>@<site> <command...>");
    const auto when = base_epoch() + seconds(number(fields[0]));
    const auto who = actor(fields[1]);

    // Everything after the actor is the command line, up to an optional "<<<".
    auto command_text = std::string(rest.substr(rest.find(fields[1]) + fields[1].size()));
    std::string stdin_data;
    if (const auto redirect = command_text.find("<<<"); redirect != std::string::npos) {
      stdin_data = std::string(strings::trim(command_text.substr(redirect + 3))) + "\n";
      command_text.erase(redirect);
    }
    command_text = std::string(strings::trim(command_text));
    std::vector<std::string> args;
    try {
      args = strings::tokenize_arguments(command_text);
    } catch (const Error& e) {
      fail(e.detail());
    }

    if (when > testbed_.now()) testbed_.advance(when - testbed_.now());

    auto ctx = cli::testbed_context(testbed_, who.user, who.site, stdin_data);
    const auto result = cli::run(ctx, args);
    last_output_ = result.out + result.err;
    last_status_ = result.status;
    transcript_ += prompt(who) + command_text + "\n" + last_output_;
    if (result.status != 0) transcript_ += fmt::format("[exit {}]\n", result.status);
  }

  void expect(std::string_view needle) {
    if (last_output_.find(needle) == std::string::npos) {
      fail(fmt::format("expected output containing '{}'", needle));
    }
  }

  void write(std::string_view rest, const std::vector<std::string>& body) {
    const auto fields = strings::split_ws(rest);
    if (fields.size() != 2) fail("expected: write <user>@<site> <path>");
    const auto who = actor(fields[0]);
    std::string content;
    for (const auto& line : body) content += line + "\n";
    const auto path = NodeFs::resolve(home_dir(who.user), fields[1]);
    testbed_.fs(who.site).write(path, content);
    transcript_ += prompt(who) + "cat " + fields[1] + "\n" + content;
  }

  Testbed& testbed_;
  std::size_t step_ = 0;
  std::string transcript_;
  std::string last_output_;
  int last_status_ = 0;
};

}  // namespace

std::string run_scenario(Testbed& testbed, std::string_view script) { return ScenarioRunner(testbed).run(script); }

}  // namespace minigrid::testbed
