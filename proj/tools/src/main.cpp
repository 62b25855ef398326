#include <iostream>

#include "prlf_cli/cli.hpp"

int main(int argc, char** argv) {
    return prlf::cli::run(argc, argv, std::cout, std::cerr);
}
