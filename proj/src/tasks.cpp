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

#include "minigrid/tasks.hpp"

#include <charconv>

#include <fmt/format.h>

#include "minigrid/strings.hpp"

namespace minigrid::testbed {

const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names = {"cat", "date", "echo", "false", "hostname", "sleep", "true"};
  return names;
}

std::string task_program(std::string_view name) { return fmt::format("{}{}\n", kTaskMagic, name); }

lrm::ExecResult TaskExecutor::execute(const lrm::ExecRequest& req) {
  lrm::ExecResult r;
  r.duration = seconds(1);
  const auto first_line = strings::trim(std::string_view(req.program).substr(0, req.program.find('\n')));
  if (first_line.substr(0, kTaskMagic.size() - 1) != strings::trim(kTaskMagic)) {
    r.err = fmt::format("{}: cannot execute binary file\n", req.executable);
    r.exit_code = 126;
    return r;
  }
  const auto name = std::string(strings::trim(first_line.substr(kTaskMagic.size() - 1)));
  const auto& args = req.arguments;

  if (name == "hostname") {
    const bool full = !args.empty() && args[0] == "-f";
    r.out = (full ? host_ : host_.substr(0, host_.find('.'))) + "\n";
  } else if (name == "date") {
    r.out = format_date(req.now) + "\n";
  } else if (name == "echo") {
    std::string line;
    for (std::size_t i = 0; i < args.size(); ++i) line += (i ? " " : "") + args[i];
    r.out = line + "\n";
  } else if (name == "sleep") {
    long n = 0;
    const auto* begin = args.empty() ? nullptr : args[0].data();
    const auto* end = args.empty() ? nullptr : args[0].data() + args[0].size();
    if (args.empty() || std::from_chars(begin, end, n).ptr != end || n < 0) {
      r.err = "sleep: invalid time interval\n";
      r.exit_code = 1;
    } else {
      r.duration = seconds(n);
    }
  } else if (name == "cat") {
    r.out = req.stdin_data;
  } else if (name == "true") {
  } else if (name == "false") {
    r.exit_code = 1;
  } else {
    r.err = fmt::format("{}: command not found\n", name);
    r.exit_code = 127;
  }
  return r;
}

}  // namespace minigrid::testbed
