#include <string>
#include <vector>

#include "anaforge/cli.hpp"

int main(int argc, char** argv) {
  return anaforge::run_cli(std::vector<std::string>(argv, argv + argc));
}
