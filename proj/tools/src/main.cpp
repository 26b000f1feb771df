#include <iostream>

#include "nowcast_cli/commands.hpp"

int main(int argc, char** argv) { return nowcast::cli::run(argc, argv, std::cout, std::cerr); }
