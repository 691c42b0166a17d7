#include <iostream>

#include "nlsysid/cli.hpp"

int main(int argc, char** argv) {
  return nlsysid::cli_main(argc, argv, std::cout, std::cerr);
}
