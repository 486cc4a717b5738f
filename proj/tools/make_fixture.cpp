// Regenerates the bundled fixture: make_fixture <dir>

#include <iostream>

#include "fixture.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixture <dir>\n";
    return 2;
  }
  fixture::write(argv[1]);
  return 0;
}
