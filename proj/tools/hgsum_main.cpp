#include "hgsum/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return hgsum::run_cli(argc, argv, std::cout, std::cerr); }
