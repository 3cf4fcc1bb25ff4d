#include "commands.hpp"

#include <iostream>

int main(int argc, char** argv) { return qch::cli::main(argc, argv, std::cout, std::cerr); }
