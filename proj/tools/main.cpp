#include <iostream>

#include "actionkit/cli.hpp"

int main(int argc, char** argv) { return actionkit::run_cli(argc, argv, std::cout, std::cerr); }
