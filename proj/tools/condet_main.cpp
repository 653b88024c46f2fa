#include "condet/cli.hpp"

int main(int argc, char** argv) { return condet::run_cli(argc, argv); }
