#include <csignal>
#include <iostream>

#include "dcomposer/cli.hpp"

namespace {
volatile std::sig_atomic_t g_interrupted = 0;
void on_signal(int) { g_interrupted = 1; }
}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::signal(SIGPIPE, SIG_IGN);
  dcomposer::CliEnv env;
  env.interrupted = [] { return g_interrupted != 0; };
  return dcomposer::run_cli({argv + 1, argv + argc}, std::cout, std::cerr, env);
}
