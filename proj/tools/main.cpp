#include "csiguard/cli.hpp"

int main(int argc, char** argv) { return csiguard::cli::run(argc, argv); }
