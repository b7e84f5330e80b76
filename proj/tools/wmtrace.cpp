#include "wmtrace/harness.hpp"

int main(int argc, char** argv) { return wmtrace::run_cli(argc, argv); }
