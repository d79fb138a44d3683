#include <iostream>
#include <string>
#include <vector>

#include "sldml/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sldml::run(args, std::cout, std::cerr);
}
