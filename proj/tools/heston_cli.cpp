#include "heston/cli.hpp"

int main(int argc, char** argv) { return heston::cli::run_command(argc, argv); }
