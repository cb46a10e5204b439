#include <iostream>
#include <string>
#include <vector>

#include "evoroc_cli/cli.hpp"

int main(int argc, char** argv) {
  return evoroc::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
