#include "irsopt/harness.hpp"

int main(int argc, char** argv) { return irsopt::cli_main(argc, argv); }
