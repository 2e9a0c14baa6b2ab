#include <vector>

#include "upmdp/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return upmdp::cli::dispatch(args);
}
