// Compiles the Catch2 amalgamated implementation (with its default main)
// once, shared by all test binaries.
#include <catch2/catch_amalgamated.cpp>
