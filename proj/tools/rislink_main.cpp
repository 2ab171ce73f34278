#include <string>
#include <vector>

#include "rislink/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return rislink::subcommand_dispatch(std::move(args));
}
