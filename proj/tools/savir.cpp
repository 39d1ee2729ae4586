#include <iostream>

#include "savir/cli/app.hpp"

int main(int argc, char** argv) { return savir::cli::run(argc, argv, std::cout, std::cerr); }
