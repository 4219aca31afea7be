#include "cinexai/cli.hpp"

int main(int argc, char** argv) { return cinexai::cli::parse_and_dispatch(argc, argv); }
