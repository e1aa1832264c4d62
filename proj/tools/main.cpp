#include "wush/cli.hpp"

int main(int argc, char** argv) { return wush::cli_main(argc, argv); }
