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

// Interpreted task programs standing in for native executables. A program
// file holds a single "#!minigrid-task <name>" line; its behaviour depends
// only on the node's host name, the node clock and the arguments.

#include <string>
#include <string_view>
#include <vector>

#include "minigrid/lrm.hpp"

namespace minigrid::testbed {

inline constexpr std::string_view kTaskMagic = "#!minigrid-task ";

/// Names of the programs installed under /bin on every site.
const std::vector<std::string>& task_names();

/// File content for the named program.
std::string task_program(std::string_view name);

class TaskExecutor : public lrm::Executor {
 public:
  explicit TaskExecutor(std::string host) : host_(std::move(host)) {}
  lrm::ExecResult execute(const lrm::ExecRequest& req) override;

 private:
  std::string host_;
};

}  // namespace minigrid::testbed
