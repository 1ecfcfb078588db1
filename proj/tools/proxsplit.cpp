#include "cli_app.hpp"

#include <iostream>

int main(int argc, char** argv) { return proxsplit::cli::main_with_args(argc, argv, std::cout, std::cerr); }
