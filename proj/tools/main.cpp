#include "commands.hpp"

int main(int argc, char** argv) { return scopf::cli::run_cli(argc, argv); }
