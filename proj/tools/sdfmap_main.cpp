#include "sdfmap/cli.hpp"

int main(int argc, char** argv) { return sdfmap::cli::main(argc, argv); }
