#include <iostream>

#include "lasan/cli/app.hpp"

int main(int argc, char** argv) {
  return lasan::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
