#include "certopt/cli.hpp"

int main(int argc, char** argv) { return certopt::cli::run(argc, argv); }
