#include "os2e/cli.hpp"

int main(int argc, char** argv) { return os2e::cli::run(argc, argv); }
