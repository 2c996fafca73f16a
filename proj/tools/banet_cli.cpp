#include "banet/cli.hpp"

int main(int argc, char** argv) { return banet::cli::run_cli(argc, argv); }
