#include <iostream>

#include "scfg/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return scfg::run_cli(args, std::cout, std::cerr);
}
