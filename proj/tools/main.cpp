#include <string>
#include <vector>

#include "tend/cli.hpp"

int main(int argc, char** argv) {
    return tend::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
