#include <iostream>

#include "treegrate/cli.hpp"

int main(int argc, char** argv) { return treegrate::cli::run(argc, argv, std::cout, std::cerr); }
