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

#include "minigrid/jobspec.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include <fmt/format.h>

#include "minigrid/classad.hpp"
#include "minigrid/error.hpp"
#include "minigrid/strings.hpp"

namespace minigrid::jobspec {

namespace {

[[noreturn]] void fail_at(Errc code, std::size_t line, const std::string& what) {
  throw Error(code, fmt::format("line {}: {}", line, what));
}

struct KeyValue {
  std::string value;
  std::size_t line = 0;
};

bool host_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_'; }
bool lrm_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_'; }

void require_single_line(std::string_view field, std::string_view value) {
  if (value.find('\n') != std::string_view::npos || value.find('\r') != std::string_view::npos) {
    throw Error(Errc::ParseError, fmt::format("{} must not contain line breaks", field));
  }
}

SubmitDescription build(const std::map<std::string, KeyValue>& keys, std::size_t queue_line, int count) {
  SubmitDescription sd;
  auto get = [&](const char* key) -> const KeyValue* {
    auto it = keys.find(key);
    return it == keys.end() ? nullptr : &it->second;
  };

  if (const auto* u = get("universe")) {
    if (strings::iequals(u->value, "vanilla")) {
      sd.universe = Universe::Vanilla;
    } else if (strings::iequals(u->value, "globus")) {
      sd.universe = Universe::Globus;
    } else {
      fail_at(Errc::UnknownUniverse, u->line, "unknown universe '" + u->value + "'");
    }
  }

  const auto* exe = get("executable");
  if (exe == nullptr || exe->value.empty()) {
    fail_at(Errc::MissingExecutable, exe ? exe->line : queue_line, "no Executable given before Queue");
  }
  sd.executable = exe->value;

  if (const auto* a = get("arguments")) {
    try {
      sd.arguments = strings::tokenize_arguments(a->value);
    } catch (const Error& e) {
      fail_at(Errc::ParseError, a->line, e.detail());
    }
  }
  if (const auto* v = get("output")) sd.output = v->value;
  if (const auto* v = get("error")) sd.error = v->value;
  if (const auto* v = get("log")) sd.log = v->value;
  if (const auto* v = get("input"); v && !v->value.empty()) sd.input = v->value;
  for (auto [key, slot] : {std::pair{"requirements", &sd.requirements}, std::pair{"rank", &sd.rank}}) {
    if (const auto* v = get(key); v && !v->value.empty()) {
      try {
        classad::parse_expr(v->value);
      } catch (const Error& e) {
        fail_at(Errc::ParseError, v->line, e.detail());
      }
      *slot = v->value;
    }
  }
  if (const auto* v = get("priority")) {
    int p = 0;
    auto [ptr, ec] = std::from_chars(v->value.data(), v->value.data() + v->value.size(), p);
    if (ec != std::errc{} || ptr != v->value.data() + v->value.size()) {
      fail_at(Errc::ParseError, v->line, "priority must be an integer");
    }
    sd.priority = p;
  }

  const auto* gr = get("grid_resource");
  if (sd.universe == Universe::Globus) {
    if (gr == nullptr || gr->value.empty()) {
      fail_at(Errc::GlobusWithoutGridResource, queue_line, "Universe = Globus requires grid_resource");
    }
    const auto parts = strings::split_ws(gr->value);
    if (parts.size() != 2 || parts[0] != "gt5") {
      fail_at(Errc::MalformedGridResource, gr->line, "expected `gt5 <host>/jobmanager-<lrm>`");
    }
    try {
      sd.grid_resource = GridResource{parts[0], parse_contact_string(parts[1])};
    } catch (const Error& e) {
      fail_at(Errc::MalformedGridResource, gr->line, e.detail());
    }
  } else if (gr != nullptr) {
    fail_at(Errc::MalformedGridResource, gr->line, "grid_resource is only valid with Universe = Globus");
  }

  sd.queue_count = count;
  return sd;
}

}  // namespace

std::vector<SubmitDescription> parse_submit_file(std::string_view text) {
  std::map<std::string, KeyValue> keys;
  std::vector<SubmitDescription> out;
  const auto lines = strings::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    const auto line = strings::trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;

    const auto words = strings::split_ws(line);
    if (strings::iequals(words.front(), "queue") && line.find('=') == std::string_view::npos) {
      int count = 1;
      if (words.size() > 2) fail_at(Errc::ParseError, lineno, "Queue takes at most one count");
      if (words.size() == 2) {
        auto [ptr, ec] = std::from_chars(words[1].data(), words[1].data() + words[1].size(), count);
        if (ec != std::errc{} || ptr != words[1].data() + words[1].size() || count < 1) {
          fail_at(Errc::ParseError, lineno, "Queue count must be a positive integer");
        }
      }
      out.push_back(build(keys, lineno, count));
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail_at(Errc::MalformedLine, lineno, "expected `Key = Value`");
    const auto key = strings::trim(line.substr(0, eq));
    if (key.empty()) fail_at(Errc::MalformedLine, lineno, "missing key before '='");
    keys[strings::to_lower(key)] = KeyValue{std::string(strings::trim(line.substr(eq + 1))), lineno};
  }
  if (out.empty()) throw Error(Errc::MissingQueue, "submit description has no Queue command");
  return out;
}

std::string ContactString::lrm() const {
  constexpr std::string_view kPrefix = "jobmanager-";
  return service.size() > kPrefix.size() ? service.substr(kPrefix.size()) : std::string{};
}

std::string ContactString::str() const {
  std::string out = host;
  if (port) out += ":" + std::to_string(*port);
  return out + "/" + service;
}

ContactString parse_contact_string(std::string_view text) {
  auto bad = [&](const std::string& why) -> Error {
    return Error(Errc::MalformedContact, fmt::format("'{}': {}", text, why));
  };
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) throw bad("expected host[:port]/jobmanager-<lrm>");

  ContactString c;
  auto hostport = text.substr(0, slash);
  const auto colon = hostport.find(':');
  if (colon != std::string_view::npos) {
    const auto port = hostport.substr(colon + 1);
    int value = 0;
    auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
    if (port.empty() || ec != std::errc{} || ptr != port.data() + port.size() || port.front() == '0' ||
        value < 1 || value > 65535) {
      throw bad("port must be an integer in 1..65535");
    }
    c.port = value;
    hostport = hostport.substr(0, colon);
  }
  if (hostport.empty() || !std::all_of(hostport.begin(), hostport.end(), host_char)) throw bad("invalid host name");
  c.host = std::string(hostport);

  const auto service = text.substr(slash + 1);
  constexpr std::string_view kPrefix = "jobmanager-";
  if (service.size() <= kPrefix.size() || service.substr(0, kPrefix.size()) != kPrefix) {
    throw bad("service must be jobmanager-<lrm>");
  }
  const auto lrm = service.substr(kPrefix.size());
  if (!std::all_of(lrm.begin(), lrm.end(), lrm_char)) throw bad("invalid jobmanager name");
  c.service = std::string(service);
  return c;
}

const std::vector<std::string>& registered_dialects() {
  static const std::vector<std::string> kDialects{"condor", "sgelike"};
  return kDialects;
}

namespace {

void check_dialect(std::string_view dialect) {
  const auto& known = registered_dialects();
  if (std::find(known.begin(), known.end(), dialect) == known.end()) {
    throw Error(Errc::UnknownDialect, fmt::format("no dialect named '{}'", dialect));
  }
}

std::string render_condor(const GramJobRequest& req) {
  std::string out;
  out += "# minigrid request " + req.request_id + "\n";
  out += "Universe = Vanilla\n";
  out += "Executable = " + req.executable + "\n";
  if (!req.arguments.empty()) out += "Arguments = " + strings::join_arguments(req.arguments) + "\n";
  out += "Output = " + req.stdout_name + "\n";
  out += "Error = " + req.stderr_name + "\n";
  if (req.stdin_name) out += "Input = " + *req.stdin_name + "\n";
  out += "Queue\n";
  return out;
}

std::string render_sgelike(const GramJobRequest& req) {
  std::vector<std::string> command{req.executable};
  command.insert(command.end(), req.arguments.begin(), req.arguments.end());
  std::string out = "#!/bin/sh\n";
  out += "#$ -N " + (req.request_id.empty() ? std::string("job") : req.request_id) + "\n";
  out += "#$ -o " + req.stdout_name + "\n";
  out += "#$ -e " + req.stderr_name + "\n";
  if (req.stdin_name) out += "#$ -i " + *req.stdin_name + "\n";
  out += strings::join_arguments(command) + "\n";
  return out;
}

NativeJob parse_sgelike(std::string_view text) {
  NativeJob job;
  bool have_command = false;
  const auto lines = strings::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = strings::trim(lines[i]);
    if (line.empty()) continue;
    if (line.substr(0, 2) == "#$") {
      const auto rest = strings::trim(line.substr(2));
      if (rest.size() < 2 || rest[0] != '-') fail_at(Errc::ParseError, i + 1, "malformed #$ directive");
      const auto flag = rest.substr(0, rest.find_first_of(" \t"));
      const auto value = std::string(strings::trim(rest.substr(flag.size())));
      if (flag == "-o") {
        job.stdout_name = value;
      } else if (flag == "-e") {
        job.stderr_name = value;
      } else if (flag == "-i") {
        job.stdin_name = value;
      }
      continue;
    }
    if (line.front() == '#') continue;
    if (have_command) fail_at(Errc::ParseError, i + 1, "script has more than one command line");
    auto tokens = strings::tokenize_arguments(line);
    if (tokens.empty()) fail_at(Errc::ParseError, i + 1, "empty command line");
    job.executable = tokens.front();
    job.arguments.assign(tokens.begin() + 1, tokens.end());
    have_command = true;
  }
  if (!have_command) throw Error(Errc::MissingExecutable, "script has no command line");
  return job;
}

}  // namespace

std::string render_dialect(const GramJobRequest& req, std::string_view dialect) {
  check_dialect(dialect);
  if (req.executable.empty()) throw Error(Errc::MissingExecutable, "request has no executable");
  require_single_line("executable", req.executable);
  require_single_line("stdout name", req.stdout_name);
  require_single_line("stderr name", req.stderr_name);
  if (req.stdin_name) require_single_line("stdin name", *req.stdin_name);
  for (const auto& arg : req.arguments) require_single_line("argument", arg);
  require_single_line("request id", req.request_id);
  return dialect == "condor" ? render_condor(req) : render_sgelike(req);
}

NativeJob parse_dialect(std::string_view text, std::string_view dialect) {
  check_dialect(dialect);
  if (dialect == "sgelike") return parse_sgelike(text);
  const auto sds = parse_submit_file(text);
  const auto& sd = sds.front();
  return NativeJob{sd.executable, sd.arguments, sd.output, sd.error, sd.input};
}

SubmitDescription to_submit_description(const NativeJob& job) {
  SubmitDescription sd;
  sd.universe = Universe::Vanilla;
  sd.executable = job.executable;
  sd.arguments = job.arguments;
  sd.output = job.stdout_name;
  sd.error = job.stderr_name;
  sd.input = job.stdin_name;
  return sd;
}

std::pair<ContactString, GramJobRequest> to_gram_request(const SubmitDescription& sd, const std::string& owner_dn,
                                                         const std::string& request_id) {
  if (sd.universe != Universe::Globus || !sd.grid_resource) {
    throw Error(Errc::NotGridUniverse, "submit description is not in the Globus universe");
  }
  GramJobRequest req;
  req.executable = sd.executable;
  req.arguments = sd.arguments;
  if (!sd.output.empty()) req.stdout_name = strings::basename(sd.output);
  if (!sd.error.empty()) req.stderr_name = strings::basename(sd.error);
  if (sd.input) req.stdin_name = strings::basename(*sd.input);
  req.owner_dn = owner_dn;
  req.target_lrm = sd.grid_resource->contact.lrm();
  req.stage_in.push_back({sd.executable, {}});
  if (sd.input) req.stage_in.push_back({*sd.input, {}});
  req.request_id = request_id;
  return {sd.grid_resource->contact, std::move(req)};
}

}  // namespace minigrid::jobspec
