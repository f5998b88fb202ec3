#include <string>
#include <vector>

#include "rexplain/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rexplain::run_cli(args);
}
