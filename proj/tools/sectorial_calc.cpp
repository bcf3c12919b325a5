#include "sectorial/cli/app.hpp"

int main(int argc, char** argv) { return sectorial::cli::main(argc, argv); }
