#include <iostream>
#include <string>
#include <vector>

#include "grounding/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return grounding::run_cli(args, std::cout, std::cerr);
}
