#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return reluiqc::cli::run(argc, argv, std::cout, std::cerr); }
