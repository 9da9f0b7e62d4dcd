#include "cli.hpp"

int main(int argc, char** argv) { return gprcap::cli::run_cli(argc, argv); }
