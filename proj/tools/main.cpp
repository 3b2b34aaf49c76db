#include "cli.hpp"

int main(int argc, char** argv) { return handsplat::run_cli(argc, argv); }
