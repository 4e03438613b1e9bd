#include "neat/cli.hpp"

int main(int argc, char** argv) { return neat::cli::run(argc, argv); }
