#include <vector>

#include "filtkit/scenario.hpp"

int main(int argc, char** argv) {
  return filtkit::cli::run_main(std::vector<std::string>(argv + 1, argv + argc));
}
