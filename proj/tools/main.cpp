#include "cli.hpp"

int main(int argc, char **argv) { return spamm::cli::cli_main(argc, argv); }
