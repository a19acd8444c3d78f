#include <iostream>

#include "atma/cli.hpp"

int main(int argc, char** argv) { return atma::run_cli(argc, argv, std::cout, std::cerr); }
