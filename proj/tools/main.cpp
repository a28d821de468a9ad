#include "esrr/cli.hpp"

int main(int argc, char** argv) { return esrr::run_cli(argc, argv); }
