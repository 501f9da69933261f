#include <vector>

#include "atnl/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return atnl::cli::run(args);
}
