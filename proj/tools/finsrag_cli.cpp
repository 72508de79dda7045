#include <vector>

#include "finsrag/cli.hpp"

int main(int argc, char** argv) {
    return finsrag::run_command(std::vector<std::string>(argv + 1, argv + argc));
}
