#include <iostream>

#include "deteval/pipeline.hpp"

int main(int argc, char** argv) {
  return deteval::io::run_cli(argc, argv, std::cout, std::cerr);
}
