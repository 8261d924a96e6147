#include <iostream>

#include "divsample/cli.hpp"

int main(int argc, char** argv) { return divsample::run_cli(argc, argv, std::cout, std::cerr); }
