#include <iostream>
#include <string>
#include <vector>

#include "hdp/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return hdp::cli::run(args, std::cin, std::cout, std::cerr);
}
