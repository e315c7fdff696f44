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

#include "minigrid/time.hpp"

#include <array>

#include <fmt/format.h>

namespace minigrid {
namespace {

using namespace std::chrono;

constexpr std::array<const char*, 7> kWeekdays{"Sun", "Mon", "Tue", "Wed", "Thu", "Fri", "Sat"};
constexpr std::array<const char*, 12> kMonths{"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                              "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

struct Fields {
  int year;
  unsigned month;
  unsigned day;
  unsigned weekday;
  long hour;
  long minute;
  long second;
  long millis;
};

Fields split(Timestamp t) {
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const weekday wd{day_point};
  const hh_mm_ss<milliseconds> hms{t - day_point};
  return {int(ymd.year()),
          unsigned(ymd.month()),
          unsigned(ymd.day()),
          wd.c_encoding(),
          long(hms.hours().count()),
          long(hms.minutes().count()),
          long(hms.seconds().count()),
          long(hms.subseconds().count())};
}

}  // namespace

Timestamp make_time(int year, unsigned month, unsigned day, int hour, int minute, int second) {
  const sys_days date{std::chrono::year{year} / std::chrono::month{month} / std::chrono::day{day}};
  return Timestamp{date.time_since_epoch()} + std::chrono::hours{hour} + std::chrono::minutes{minute} +
         std::chrono::seconds{second};
}

std::string format_short(Timestamp t) {
  const auto f = split(t);
  return fmt::format("{}/{} {:02}:{:02}", f.month, f.day, f.hour, f.minute);
}

std::string format_runtime(Duration d) {
  auto total = duration_cast<std::chrono::seconds>(d).count();
  if (total < 0) total = 0;
  const auto days_part = total / 86400;
  total %= 86400;
  return fmt::format("{}+{:02}:{:02}:{:02}", days_part, total / 3600, (total % 3600) / 60, total % 60);
}

std::string format_date(Timestamp t) {
  const auto f = split(t);
  return fmt::format("{} {} {:>2} {:02}:{:02}:{:02} IST {}", kWeekdays[f.weekday], kMonths[f.month - 1], f.day,
                     f.hour, f.minute, f.second, f.year);
}

std::string format_ctime(Timestamp t) {
  const auto f = split(t);
  return fmt::format("{} {} {:>2} {:02}:{:02}:{:02} {}", kWeekdays[f.weekday], kMonths[f.month - 1], f.day, f.hour,
                     f.minute, f.second, f.year);
}

std::string format_log_stamp(Timestamp t) {
  const auto f = split(t);
  return fmt::format("{:02}/{:02} {:02}:{:02}:{:02}", f.month, f.day, f.hour, f.minute, f.second);
}

std::string format_iso(Timestamp t) {
  const auto f = split(t);
  return fmt::format("{}-{:02}-{:02} {:02}:{:02}:{:02}.{:03}", f.year, f.month, f.day, f.hour, f.minute, f.second,
                     f.millis);
}

std::string format_hms(Duration d) {
  auto total = duration_cast<std::chrono::seconds>(d).count();
  if (total < 0) total = 0;
  return fmt::format("{}:{:02}:{:02}", total / 3600, (total % 3600) / 60, total % 60);
}

}  // namespace minigrid
