#include <iostream>

#include "desnow_cli/cli.hpp"

int main(int argc, char** argv) {
  return desnow::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
