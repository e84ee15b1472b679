#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) { return probelab::cli::run(argc, argv, std::cout, std::cerr); }
