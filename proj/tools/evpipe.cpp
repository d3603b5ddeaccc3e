#include <iostream>
#include <string>
#include <vector>

#include "evrecon/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return evrecon::run_cli(args, std::cout, std::cerr);
}
