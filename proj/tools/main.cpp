#include "featclean/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return featclean::run_cli(argc, argv, std::cout, std::cerr); }
