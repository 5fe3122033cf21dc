#include "adprec/cli.hpp"

int main(int argc, char** argv) {
    return adprec::cli_main(argc, argv);
}
