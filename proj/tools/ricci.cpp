#include "ricci/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return ricci::run_cli(argc, argv, std::cout, std::cerr);
}
