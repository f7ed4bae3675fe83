#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mvrad {

using LogFields = std::vector<std::pair<std::string, std::string>>;

/// Writes one structured `key=value` line to standard error.
void log_event(std::string_view level, std::string_view stage, const LogFields& fields = {});

inline void log_info(std::string_view stage, const LogFields& fields = {}) { log_event("info", stage, fields); }
inline void log_warn(std::string_view stage, const LogFields& fields = {}) { log_event("warn", stage, fields); }

/// Silences info lines (warnings still print). Used by tests.
void set_log_quiet(bool quiet);

std::string fmt_double(double value, int precision = 6);

}  // namespace mvrad
