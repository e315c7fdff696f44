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

#include <string>
#include <string_view>
#include <vector>

namespace minigrid::strings {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool starts_with_icase(std::string_view s, std::string_view prefix);
std::vector<std::string> split_lines(std::string_view text);
std::vector<std::string> split_ws(std::string_view text);

/// Splits an argument string on whitespace; double quotes group a token and
/// `\"` / `\\` escape inside quotes. Throws Error(ParseError) on an
/// unterminated quote.
std::vector<std::string> tokenize_arguments(std::string_view text);
/// Inverse of tokenize_arguments: tokenize_arguments(join_arguments(v)) == v.
std::string join_arguments(const std::vector<std::string>& args);

std::string basename(std::string_view path);

}  // namespace minigrid::strings
