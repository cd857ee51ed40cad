#include <vector>
#include <string>

#include "flexsched/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return flexsched::run_cli(args);
}
