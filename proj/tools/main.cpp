#include <iostream>

#include "ttw_cli.hpp"

int main(int argc, char** argv) { return ttw::cli::dispatch(argc, argv, std::cout, std::cerr); }
