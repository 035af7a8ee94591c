#include "deva/cli.hpp"

int main(int argc, char** argv) { return deva::run_cli(argc, argv); }
