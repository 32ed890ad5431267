#include <iostream>

#include "cli.hpp"
#include "madgan/runtime.hpp"

int main(int argc, char** argv) {
  madgan::configure_allocator();
  return madgan::cli::run(argc, argv, std::cout, std::cerr);
}
