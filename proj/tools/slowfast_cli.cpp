#include "slowfast/cli.hpp"

int main(int argc, char** argv) { return slowfast::cli::run(argc, argv); }
