#include <string>
#include <vector>

#include "senh/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return senh::dispatch(args);
}
