#include "ccm/cli.hpp"

int main(int argc, char** argv) { return ccm::run(argc, argv); }
