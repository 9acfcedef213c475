#include "cli.hpp"

int main(int argc, char** argv) { return themes::cli::run(argc, argv); }
