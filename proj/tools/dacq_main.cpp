#include "dacq/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return dacq::cli::run(argc, argv, std::cout, std::cerr); }
