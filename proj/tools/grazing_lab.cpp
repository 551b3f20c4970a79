#include <glab/cli.hpp>

int main(int argc, char** argv) { return glab::cli::run_command(argc, argv); }
