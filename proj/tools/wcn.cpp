#include "wcn/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return wcn::run_cli(argc, argv, std::cout, std::cerr); }
