#include <iostream>

#include "layerkit/cli.hpp"

int main(int argc, char** argv) { return layerkit::run_cli(argc, argv, std::cout, std::cerr); }
