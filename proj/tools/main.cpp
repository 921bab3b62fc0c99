#include "endo/cli/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return endo::cli::run(argc, argv, std::cout, std::cerr); }
