#include <vector>

#include "attrib/cli.hpp"

int main(int argc, char** argv) {
  return attrib::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
