#include "qtel/cli.hpp"

int main(int argc, char** argv) { return qtel::cli::run_cli(argc, argv); }
