#include <iostream>

#include "adml/cli/commands.hpp"

int main(int argc, char** argv) { return adml::cli::run(argc, argv, std::cout, std::cerr); }
