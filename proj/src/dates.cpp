#include "ivrlens/dates.hpp"

#include <charconv>
#include <cstdio>

namespace ivrlens {

namespace {

bool parse_int_field(std::string_view s, int& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

std::optional<Date> parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    int y = 0, m = 0, d = 0;
    if (!parse_int_field(text.substr(0, 4), y) || !parse_int_field(text.substr(5, 2), m) ||
        !parse_int_field(text.substr(8, 2), d)) {
        return std::nullopt;
    }
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(m)},
                                    std::chrono::day{unsigned(d)}};
    if (!ymd.ok()) return std::nullopt;
    return std::chrono::sys_days{ymd};
}

std::string format_date(Date d) {
    std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()),
                  unsigned(ymd.day()));
    return buf;
}

std::optional<int> parse_time_of_day(std::string_view text) {
    if (text.size() != 8 || text[2] != ':' || text[5] != ':') return std::nullopt;
    int h = 0, m = 0, s = 0;
    if (!parse_int_field(text.substr(0, 2), h) || !parse_int_field(text.substr(3, 2), m) ||
        !parse_int_field(text.substr(6, 2), s)) {
        return std::nullopt;
    }
    if (h < 0 || h > 23 || m < 0 || m > 59 || s < 0 || s > 59) return std::nullopt;
    return h * 3600 + m * 60 + s;
}

std::string format_time_of_day(int seconds) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%02d:%02d:%02d", seconds / 3600, (seconds / 60) % 60,
                  seconds % 60);
    return buf;
}

int weekday_monday0(Date d) {
    std::chrono::weekday wd{d};
    return int(wd.iso_encoding()) - 1;
}

int week_of_year(Date d) {
    std::chrono::year_month_day ymd{d};
    Date jan1{std::chrono::year_month_day{ymd.year(), std::chrono::January, std::chrono::day{1}}};
    int doy = int((d - jan1).count());
    return doy / 7;
}

}  // namespace ivrlens
