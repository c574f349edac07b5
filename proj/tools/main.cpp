#include <iostream>
#include <string>
#include <vector>

#include "iekm/cli.hpp"

int main(int argc, char** argv) {
  return iekm::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
