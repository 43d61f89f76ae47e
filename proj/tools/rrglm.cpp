#include "rrglm/cli.hpp"

int main(int argc, char** argv) { return rrglm::cli::run(argc, argv); }
