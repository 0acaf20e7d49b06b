#include "laifo/cli/app.hpp"

int main(int argc, char** argv) { return laifo::cli::run(argc, argv); }
