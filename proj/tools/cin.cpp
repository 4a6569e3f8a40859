#include "cin/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return cin::cli::main(argc, argv, std::cout, std::cerr); }
