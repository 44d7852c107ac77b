#include "blr/cli.hpp"

int main(int argc, char **argv) {
    return blr::run_cli(argc, argv);
}
