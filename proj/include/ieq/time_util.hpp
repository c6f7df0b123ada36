#ifndef IEQ_TIME_UTIL_HPP
#define IEQ_TIME_UTIL_HPP

#include <cstdint>
#include <string>

namespace ieq::time_util {

// Timestamps are naive wall-clock epoch seconds: the sensor's own clock with
// no timezone attached. Calendar math is done with proleptic-Gregorian civil
// arithmetic so results are identical on every host.

struct CivilDateTime {
    int year;
    int month;   // 1..12
    int day;     // 1..31
    int hour;
    int minute;
    int second;
};

/// Days since 1970-01-01 for a civil date.
std::int64_t days_from_civil(int year, int month, int day);

CivilDateTime civil_from_epoch(std::int64_t epoch_seconds);
std::int64_t epoch_from_civil(const CivilDateTime& c);

/// Seconds since midnight of the timestamp's own calendar day, in [0, 86400).
std::int64_t seconds_into_day(std::int64_t epoch_seconds);

/// Calendar month 1..12.
int month_of(std::int64_t epoch_seconds);

/**
 * Parse "YYYY-MM-DD HH:MM[:SS]" (space or 'T' separator, optional fractional
 * seconds and trailing 'Z', both ignored) or a plain number of epoch seconds.
 * Returns false when the text matches neither form.
 */
bool parse_timestamp(const std::string& text, std::int64_t& out_epoch);

/// "YYYY-MM-DD HH:MM:SS".
std::string format_timestamp(std::int64_t epoch_seconds);

}  // namespace ieq::time_util

#endif  // IEQ_TIME_UTIL_HPP
