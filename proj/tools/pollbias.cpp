#include "pollbias/cli.hpp"

int main(int argc, char** argv) { return pollbias::cli::run(argc, argv); }
