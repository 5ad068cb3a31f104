#include "pccal/cli.hpp"

int main(int argc, char** argv) { return pccal::cli::main_entry(argc, argv); }
