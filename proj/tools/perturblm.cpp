#include "perturblm/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return perturblm::run_cli(args, std::cout, std::cerr);
}
