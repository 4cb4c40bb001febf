#include "dsdh/commands.hpp"

int main(int argc, char** argv) { return dsdh::run_cli(argc, argv); }
