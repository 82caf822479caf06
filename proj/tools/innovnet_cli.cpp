#include "innovnet/cli.hpp"

int main(int argc, char** argv) { return innovnet::cli_main(argc, argv); }
