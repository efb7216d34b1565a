#include "cinet/cli.hpp"

int main(int argc, char** argv) { return cinet::cli::dispatch(argc, argv); }
