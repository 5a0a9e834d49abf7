#include "lsail/cli.hpp"

int main(int argc, char** argv) { return lsail::run_cli(argc, argv); }
