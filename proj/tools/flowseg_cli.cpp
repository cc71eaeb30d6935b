#include <iostream>

#include "flowseg/cli.hpp"

int main(int argc, char** argv) { return flowseg::run_cli(argc, argv, std::cout, std::cerr); }
