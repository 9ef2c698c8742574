#include "rlsol/cli.hpp"

int main(int argc, char** argv) { return rlsol::cli_main(argc, argv); }
