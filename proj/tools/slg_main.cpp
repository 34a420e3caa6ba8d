#include <cstdio>
#include <exception>

#include "slg/cli.hpp"

int main(int argc, char** argv) {
    try {
        return slg::run_cli(argc, argv);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fatal: %s\n", e.what());
        return 1;
    }
}
