#include <iostream>
#include <string>
#include <vector>

#include "scenepool/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return scenepool::run_cli(args, std::cout, std::cerr);
}
