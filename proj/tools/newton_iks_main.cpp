#include <iostream>

#include "newton_iks/cli.hpp"

int main(int argc, char** argv) { return newton_iks::cli_main(argc, argv, std::cout, std::cerr); }
