#include "treeshape/cli.hpp"

int main(int argc, char** argv) { return treeshape::cli::cli_main(argc, argv); }
