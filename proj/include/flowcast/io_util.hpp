#ifndef FLOWCAST_IO_UTIL_HPP
#define FLOWCAST_IO_UTIL_HPP

#include <string>
#include <vector>

namespace flowcast {

// --- calendar ---------------------------------------------------------
// Serial day numbers (days since 1970-01-01); daily data, no time zones.

long days_from_civil(int year, int month, int day);
void civil_from_days(long serial, int& year, int& month, int& day);

/** Parses "YYYY-MM-DD". Throws DataError on malformed input. */
long parse_date(const std::string& iso);
std::string format_date(long serial);

// --- text files -------------------------------------------------------

/** Writes via a temp file and rename so readers never see partial output. */
void write_text_atomic(const std::string& path, const std::string& content);

std::vector<std::string> read_lines(const std::string& path);

/** Splits one CSV line on commas (no quoting; the layouts here need none). */
std::vector<std::string> split_csv(const std::string& line);

/** Shortest float format that round-trips doubles exactly ("%.17g"). */
std::string fmt_full(double v);
/** Fixed report precision ("%.10g"); NaN renders as empty field. */
std::string fmt_report(double v);

double parse_double(const std::string& field, const std::string& context);

} // namespace flowcast

#endif // FLOWCAST_IO_UTIL_HPP
