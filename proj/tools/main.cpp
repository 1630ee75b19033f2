#include <iostream>
#include <string>
#include <vector>

#include "qauction/cli/dispatch.hpp"

int main(int argc, char** argv) {
  return qauction::cli::dispatch(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
