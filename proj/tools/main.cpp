#include <iostream>

#include "smcsynth/cli.hpp"

int main(int argc, char** argv) { return smcsynth::cli::run(argc, argv, std::cout, std::cerr); }
