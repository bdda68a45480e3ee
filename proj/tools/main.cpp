#include "commands.hpp"

int main(int argc, char** argv) { return upseg::cli::run(argc, argv); }
