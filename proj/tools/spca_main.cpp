#include "spca/cli.hpp"

int main(int argc, char** argv) { return spca::cli::run(argc, argv); }
