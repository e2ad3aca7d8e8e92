#include "hybridroute/cli.hpp"

int main(int argc, char** argv) { return hybridroute::cli::run(argc, argv); }
