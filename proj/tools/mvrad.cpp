#include "mvrad/cli.hpp"

int main(int argc, char** argv) { return mvrad::run_cli(argc, argv); }
