#include "erank/cli.hpp"

int main(int argc, char** argv) { return erank::run_command(argc, argv); }
