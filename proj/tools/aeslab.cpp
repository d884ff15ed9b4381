#include <iostream>

#include "aeslab/cli.hpp"

int main(int argc, char** argv) { return aeslab::run_cli(argc, argv, std::cout, std::cerr); }
