#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "mvrad/log.hpp"

int main(int argc, char** argv) {
  mvrad::set_log_quiet(true);
  doctest::Context context;
  context.applyCommandLine(argc, argv);
  return context.run();
}
