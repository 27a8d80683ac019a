#include "chfv/cli.hpp"

int main(int argc, char** argv) { return chfv::run_cli(argc, argv); }
