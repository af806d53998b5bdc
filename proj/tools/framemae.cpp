#include <iostream>

#include "framemae/cli.hpp"

int main(int argc, char** argv) { return framemae::run_cli(argc, argv, std::cout, std::cerr); }
