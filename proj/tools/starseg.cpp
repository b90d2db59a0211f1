#include "starseg/cli.hpp"

int main(int argc, char** argv) { return starseg::cli::run(argc, argv); }
