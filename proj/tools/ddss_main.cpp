#include "ddss/cli.hpp"

int main(int argc, char** argv) { return ddss::run_cli(argc, argv); }
