#include "cli_app.hpp"

int main(int argc, char** argv) { return ionsim::cli::run_cli(argc, argv); }
