#include "cli.hpp"

int main(int argc, char** argv) { return metaemb::cli::run(argc, argv); }
