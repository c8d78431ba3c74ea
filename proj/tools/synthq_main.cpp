#include <iostream>
#include <string>
#include <vector>

#include "synthq/pipeline.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return synthq::run_cli(args, std::cout, std::cerr);
}
