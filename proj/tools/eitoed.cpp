#include "eit/cli.hpp"

int main(int argc, char** argv) { return eit::run_cli(argc, argv); }
