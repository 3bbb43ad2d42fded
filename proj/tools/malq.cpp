#include <string>
#include <vector>

#include "malq/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return malq::cli_dispatch(args);
}
