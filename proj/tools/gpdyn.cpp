#include "gpdyn/cli.hpp"

int main(int argc, char** argv) { return gpdyn::run_cli(argc, argv); }
