#include "kunet/cli.hpp"

int main(int argc, char** argv) { return kunet::run_cli(argc, argv); }
