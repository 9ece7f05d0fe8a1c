#include <iostream>

#include "kgacc/cli.hpp"

int main(int argc, char** argv) { return kgacc::cli::run(argc, argv, std::cout, std::cerr); }
