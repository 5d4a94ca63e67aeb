#include <iostream>

#include "stabilens/cli.hpp"

int main(int argc, char** argv) { return stabilens::run_cli(argc, argv, std::cout, std::cerr); }
