#include <iostream>

#include "mpforge/log.hpp"
#include "mpforge_cli/commands.hpp"

int main(int argc, char** argv) {
  mpforge::configure_logging_from_env();
  return mpforge::cli::run_cli(argc, argv, std::cout, std::cerr);
}
