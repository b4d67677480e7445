#include <iostream>
#include <string>
#include <vector>

#include "ncvx/cli.hpp"

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return ncvx::cli::main(args, std::cout, std::cerr);
}
