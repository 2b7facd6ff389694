#include "geodepth/cli.hpp"

int main(int argc, char** argv) { return geodepth::run_cli(argc, argv); }
