#include "mvrad/log.hpp"

#include <atomic>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <sstream>

namespace mvrad {

namespace {
std::atomic<bool> g_quiet{false};
std::mutex g_log_mutex;
}  // namespace

void set_log_quiet(bool quiet) { g_quiet = quiet; }

void log_event(std::string_view level, std::string_view stage, const LogFields& fields) {
  if (g_quiet && level == "info") return;
  std::ostringstream line;
  line << "level=" << level << " stage=" << stage;
  for (const auto& [key, value] : fields) {
    line << ' ' << key << '=';
    if (value.find(' ') != std::string::npos) {
      line << '"' << value << '"';
    } else {
      line << value;
    }
  }
  line << '\n';
  std::lock_guard<std::mutex> lock(g_log_mutex);
  std::cerr << line.str();
}

std::string fmt_double(double value, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, value);
  return buf;
}

}  // namespace mvrad
