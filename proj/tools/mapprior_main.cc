#include <iostream>
#include <string>
#include <vector>

#include "mapprior/cli.h"

int main(int argc, char** argv) {
  return mapprior::RunCli(std::vector<std::string>(argv, argv + argc),
                          std::cout, std::cerr);
}
