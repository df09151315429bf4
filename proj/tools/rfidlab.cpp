#include <iostream>

#include "rfidlab/harness/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rfidlab::harness::run_cli(args, std::cout, std::cerr);
}
