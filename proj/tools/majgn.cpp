#include "majgn/cli.hpp"

int main(int argc, char** argv) { return majgn::cli::main(argc, argv); }
