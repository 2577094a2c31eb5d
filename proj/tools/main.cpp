#include <iostream>

#include "adpanel/cli.hpp"

int main(int argc, char** argv) {
    return adpanel::cli::run(argc, argv, std::cout, std::cerr);
}
