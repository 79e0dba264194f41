#include <iostream>

#include "dpfair/cli_io.hpp"

int main(int argc, char** argv) {
  try {
    const auto config = dpfair::parse_command_line(argc, argv);
    if (!config) return 0;
    return dpfair::run(*config, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "dp-postfair: error: " << e.what() << "\n";
    return 2;
  }
}
