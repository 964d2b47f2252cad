#include "regret_forge/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return regret_forge::cli_main(argc, argv, std::cout, std::cerr); }
