#include <iostream>

#include "shotdirector/cli.hpp"

int main(int argc, char** argv) { return shotdirector::run(argc, argv, std::cout, std::cerr); }
