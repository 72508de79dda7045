#pragma once
// Plain Y-M-D calendar dates. Trading calendars are whatever the bar data
// contains, so this only needs parsing, formatting, ordering, and the
// one-year buffer arithmetic.

#include <compare>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace finsrag {

struct Date {
    int y = 0;
    int m = 0;
    int d = 0;
    auto operator<=>(const Date&) const = default;
};

inline bool is_leap_year(int y) {
    return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

inline int days_in_month(int y, int m) {
    static const int table[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && is_leap_year(y)) return 29;
    return table[m - 1];
}

// Strict YYYY-MM-DD, validated against the real calendar.
inline Date parse_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-')
        throw std::invalid_argument("bad date '" + s + "': expected YYYY-MM-DD");
    for (int i : {0, 1, 2, 3, 5, 6, 8, 9})
        if (s[i] < '0' || s[i] > '9')
            throw std::invalid_argument("bad date '" + s + "': expected YYYY-MM-DD");
    auto num = [&](int pos, int len) {
        int v = 0;
        for (int i = 0; i < len; ++i) v = v * 10 + (s[pos + i] - '0');
        return v;
    };
    Date dt{num(0, 4), num(5, 2), num(8, 2)};
    if (dt.m < 1 || dt.m > 12 || dt.d < 1 || dt.d > days_in_month(dt.y, dt.m))
        throw std::invalid_argument("bad date '" + s + "': no such calendar day");
    return dt;
}

inline std::string format_date(const Date& dt) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", dt.y, dt.m, dt.d);
    return buf;
}

// Same month/day n years on; Feb 29 clamps to Feb 28 in non-leap targets.
inline Date add_years(const Date& dt, int n) {
    Date out{dt.y + n, dt.m, dt.d};
    if (out.m == 2 && out.d == 29 && !is_leap_year(out.y)) out.d = 28;
    return out;
}

// Day-after helper used for "pool advanced past the last trading day".
inline Date next_calendar_day(const Date& dt) {
    Date out = dt;
    if (++out.d > days_in_month(out.y, out.m)) {
        out.d = 1;
        if (++out.m > 12) {
            out.m = 1;
            ++out.y;
        }
    }
    return out;
}

}  // namespace finsrag
