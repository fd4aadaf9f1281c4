#include <iostream>
#include <string>
#include <vector>

#include "subthermal/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return subthermal::cli::run(args, std::cout, std::cerr);
}
