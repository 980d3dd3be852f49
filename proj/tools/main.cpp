#include <iostream>

#include "hypermatch_cli/app.hpp"

int main(int argc, char** argv) {
  hypermatch::cli::configure_logging();
  return hypermatch::cli::run(argc, argv, std::cout, std::cerr);
}
