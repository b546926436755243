#include "descent/commands.hpp"

#include <iostream>

int main(int argc, char** argv) { return descent::run_cli(argc, argv, std::cout, std::cerr); }
