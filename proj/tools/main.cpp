#include "pucci/harness.hpp"

int main(int argc, char** argv) { return pucci::cli(argc, argv); }
