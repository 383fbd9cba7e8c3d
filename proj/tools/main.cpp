#include "compete/cli.hpp"

int main(int argc, char** argv) { return compete::cli_main(argc, argv); }
