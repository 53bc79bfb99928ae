#include <iostream>

#include "p5/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return p5::run_subcommand(args, std::cout, std::cerr);
}
