#include <iostream>

#include "liftgan/cli.hpp"

int main(int argc, char** argv) { return liftgan::cli::run(argc, argv, std::cout, std::cerr); }
