#include "commands.hpp"

int main(int argc, char** argv) { return hazspline::cli::run(argc, argv); }
