#include "cli.hpp"

int main(int argc, char** argv) { return focus::cli::run(argc, argv); }
