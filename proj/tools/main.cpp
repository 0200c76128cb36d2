// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "salatt/cli.hpp"

int main(int argc, char** argv) { return salatt::run_cli(argc, argv, std::cout, std::cerr); }
