#include "si3/cli/app.hpp"

int main(int argc, char** argv) { return si3::cli::run(argc, argv); }
