#include "spo_cli.hpp"

int main(int argc, char** argv) { return spo::cli::run(argc, argv); }
