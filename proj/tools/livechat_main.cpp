#include <iostream>

#include "livechat/cli/cli.hpp"

int main(int argc, char** argv) { return livechat::cli::run_cli(argc, argv, std::cout, std::cerr); }
