#include "ieq/time_util.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace ieq::time_util {

// Howard Hinnant's days-from-civil algorithm (proleptic Gregorian).
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                         static_cast<unsigned>(d) - 1u;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

static void civil_from_days(std::int64_t z, int& year, int& month, int& day) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    day = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    month = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
    year = static_cast<int>(y + (month <= 2));
}

static std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

CivilDateTime civil_from_epoch(std::int64_t epoch_seconds) {
    const std::int64_t days = floor_div(epoch_seconds, 86400);
    std::int64_t sod = epoch_seconds - days * 86400;
    CivilDateTime c{};
    civil_from_days(days, c.year, c.month, c.day);
    c.hour = static_cast<int>(sod / 3600);
    c.minute = static_cast<int>((sod % 3600) / 60);
    c.second = static_cast<int>(sod % 60);
    return c;
}

std::int64_t epoch_from_civil(const CivilDateTime& c) {
    return days_from_civil(c.year, c.month, c.day) * 86400 + c.hour * 3600 + c.minute * 60 +
           c.second;
}

std::int64_t seconds_into_day(std::int64_t epoch_seconds) {
    const std::int64_t days = floor_div(epoch_seconds, 86400);
    return epoch_seconds - days * 86400;
}

int month_of(std::int64_t epoch_seconds) {
    return civil_from_epoch(epoch_seconds).month;
}

static bool parse_int_field(const char* p, int len, int& out) {
    int v = 0;
    for (int i = 0; i < len; ++i) {
        if (p[i] < '0' || p[i] > '9') return false;
        v = v * 10 + (p[i] - '0');
    }
    out = v;
    return true;
}

bool parse_timestamp(const std::string& text, std::int64_t& out_epoch) {
    std::size_t begin = text.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return false;
    std::size_t end = text.find_last_not_of(" \t\r");
    const std::string s = text.substr(begin, end - begin + 1);

    // Calendar form: YYYY-MM-DD[ T]HH:MM[:SS[.frac]][Z]
    if (s.size() >= 16 && s[4] == '-' && s[7] == '-' && (s[10] == ' ' || s[10] == 'T') &&
        s[13] == ':') {
        CivilDateTime c{};
        if (!parse_int_field(s.data(), 4, c.year) || !parse_int_field(s.data() + 5, 2, c.month) ||
            !parse_int_field(s.data() + 8, 2, c.day) ||
            !parse_int_field(s.data() + 11, 2, c.hour) ||
            !parse_int_field(s.data() + 14, 2, c.minute)) {
            return false;
        }
        c.second = 0;
        if (s.size() >= 19 && s[16] == ':') {
            if (!parse_int_field(s.data() + 17, 2, c.second)) return false;
        }
        if (c.month < 1 || c.month > 12 || c.day < 1 || c.day > 31 || c.hour > 23 ||
            c.minute > 59 || c.second > 60) {
            return false;
        }
        out_epoch = epoch_from_civil(c);
        return true;
    }

    // Numeric form: epoch seconds (integer or real).
    char* parse_end = nullptr;
    const double v = std::strtod(s.c_str(), &parse_end);
    if (parse_end == s.c_str() || *parse_end != '\0' || !std::isfinite(v)) return false;
    out_epoch = static_cast<std::int64_t>(std::llround(v));
    return true;
}

std::string format_timestamp(std::int64_t epoch_seconds) {
    const CivilDateTime c = civil_from_epoch(epoch_seconds);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02d:%02d:%02d", c.year, c.month, c.day,
                  c.hour, c.minute, c.second);
    return buf;
}

}  // namespace ieq::time_util
