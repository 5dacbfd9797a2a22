#include "ctseg/cli.hpp"

int main(int argc, char** argv) { return ctseg::run_cli(argc, argv); }
