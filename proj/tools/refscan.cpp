#include <csignal>

#include "refscan/cli.hpp"

int main(int argc, char** argv) {
  std::signal(SIGPIPE, SIG_IGN);
  return refscan::cli::run(argc, argv);
}
