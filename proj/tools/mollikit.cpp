#include "mollikit/runner.hpp"

int main(int argc, char** argv) { return mollikit::runner::main(argc, argv); }
