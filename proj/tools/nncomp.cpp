#include <iostream>
#include <string>
#include <vector>

#include "nncomp/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return nncomp::run(args, std::cout, std::cerr);
}
