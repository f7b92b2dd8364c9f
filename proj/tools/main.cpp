#include <iostream>

#include "priornet/cli.hpp"

int main(int argc, char** argv) {
  return priornet::run_command(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
