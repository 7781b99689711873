#include "sloam/cli.hpp"

int main(int argc, char** argv) { return sloam::cli_main(argc, argv); }
