#include "voxalign/cli.hpp"

int main(int argc, char** argv) { return voxalign::run_cli(argc, argv); }
