#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>

namespace ivrlens {

// Calendar dates are day counts since the civil epoch (std::chrono::sys_days).
using Date = std::chrono::sys_days;

// "YYYY-MM-DD" -> date. Rejects malformed strings and invalid calendar days.
std::optional<Date> parse_date(std::string_view text);

// date -> "YYYY-MM-DD"
std::string format_date(Date d);

// "HH:MM:SS" (24h) -> seconds since midnight, [0, 86400).
std::optional<int> parse_time_of_day(std::string_view text);

// seconds since midnight -> "HH:MM:SS"
std::string format_time_of_day(int seconds);

// 0 = Monday ... 6 = Sunday
int weekday_monday0(Date d);

// Day-of-year based week index, 0..52.
int week_of_year(Date d);

}  // namespace ivrlens
