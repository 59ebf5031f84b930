#include "embedlab/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return embedlab::run_cli(argc, argv, std::cout, std::cerr); }
