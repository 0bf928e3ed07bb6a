#include <string>
#include <vector>

#include "nico/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return nico::cli::dispatch(args);
}
