#include "radlabel/cli.hpp"

int main(int argc, char** argv) { return radlabel::run_cli(argc, argv); }
