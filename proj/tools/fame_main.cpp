#include <iostream>
#include <string>
#include <vector>

#include "fame/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return fame::run_cli(args, std::cout, std::cerr);
}
