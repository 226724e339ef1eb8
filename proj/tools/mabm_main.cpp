#include <iostream>

#include "mabm/cli.hpp"

int main(int argc, char** argv) { return mabm::cli::run_main(argc, argv, std::cout, std::cerr); }
