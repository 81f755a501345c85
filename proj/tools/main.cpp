#include <iostream>

#include "retrocap/cli.hpp"

int main(int argc, char** argv) { return retrocap::run_cli(argc, argv, std::cout, std::cerr); }
