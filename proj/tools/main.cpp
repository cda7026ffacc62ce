#include "cli.hpp"

int main(int argc, char** argv) { return lc2st::cli::cli_main(argc, argv); }
