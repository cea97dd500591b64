#include <iostream>

#include "qv/cli/cli.hpp"

int main(int argc, char** argv) { return qv::cli::run_cli(argc, argv, std::cout, std::cerr); }
