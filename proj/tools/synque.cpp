#include "synque/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return synque::run_cli(argc, argv, std::cout, std::cerr); }
