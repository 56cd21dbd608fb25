#include <string>
#include <vector>

#include "umbrela/cli_app.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return umbrela::cli::run(args);
}
