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

#include <chrono>
#include <cstdint>
#include <string>

namespace minigrid {

using Duration = std::chrono::milliseconds;
using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

inline constexpr Duration seconds(std::int64_t s) { return std::chrono::seconds{s}; }
inline constexpr Duration hours(std::int64_t h) { return std::chrono::hours{h}; }

inline std::int64_t to_epoch_ms(Timestamp t) { return t.time_since_epoch().count(); }
inline Timestamp from_epoch_ms(std::int64_t ms) { return Timestamp{Duration{ms}}; }
inline std::int64_t to_epoch_seconds(Timestamp t) {
  return std::chrono::floor<std::chrono::seconds>(t).time_since_epoch().count();
}
inline Timestamp from_epoch_seconds(std::int64_t s) { return Timestamp{std::chrono::seconds{s}}; }

/// Builds a timestamp from calendar fields; all rendering treats virtual
/// time as the testbed's single local zone.
Timestamp make_time(int year, unsigned month, unsigned day, int hour = 0, int minute = 0, int second = 0);

/// "2/13 13:02" as in queue and history listings.
std::string format_short(Timestamp t);
/// "0+00:00:01"
std::string format_runtime(Duration d);
/// "Wed Feb 13 13:14:05 IST 2013" as printed by the date task.
std::string format_date(Timestamp t);
/// "Thu Feb 14 01:11:48 2013"
std::string format_ctime(Timestamp t);
/// "02/05 15:07:56" as used in user log events.
std::string format_log_stamp(Timestamp t);
/// "2013-02-05 15:07:56.000" as used in daemon logs.
std::string format_iso(Timestamp t);
/// "12:00:00" style hours:minutes:seconds, hours unbounded.
std::string format_hms(Duration d);

}  // namespace minigrid
