#include <iostream>

#include "elign/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return elign::cli::run(args, std::cout, std::cerr);
}
