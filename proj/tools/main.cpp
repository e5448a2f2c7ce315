#include <iostream>

#include "ramsift/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ramsift::run(std::move(args), std::cout, std::cerr);
}
