#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
    const auto config = stackgen::cli::parse_args(argc, argv);
    return stackgen::cli::run(config, std::cout, std::cerr);
}
