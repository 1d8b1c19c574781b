#include "hdgnn/cli.hpp"

int main(int argc, char** argv) { return hdgnn::run_cli(argc, argv); }
