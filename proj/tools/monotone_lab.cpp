#include <iostream>
#include <string>
#include <vector>

#include "monolab/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return monolab::cli::run(args, std::cout, std::cerr);
}
