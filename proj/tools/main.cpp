#include "adamlab/cli.hpp"

int main(int argc, char** argv) { return adamlab::cli_main(argc, argv); }
