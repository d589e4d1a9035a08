#include "cli.hpp"

int main(int argc, char** argv) { return salve::cli::run(argc, argv); }
