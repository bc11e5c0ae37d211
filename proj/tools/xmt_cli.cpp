#include "xmt/cli.hpp"

int main(int argc, char** argv) { return xmt::dispatch(argc, argv); }
