#include <iostream>

#include "sstbert/cli/commands.hpp"

int main(int argc, char** argv) { return sstbert::cli::run_cli(argc, argv, std::cout, std::cerr); }
