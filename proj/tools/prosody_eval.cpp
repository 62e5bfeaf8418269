#include <csignal>
#include <cstdlib>
#include <iostream>
#include <thread>

#include "prosody_eval/cli.hpp"

int main(int argc, char** argv) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  std::thread([signals] {
    int sig = 0;
    sigwait(&signals, &sig);
    if (!prosody_eval::request_server_stop()) std::_Exit(128 + sig);
  }).detach();

  std::vector<std::string> args(argv + 1, argv + argc);
  return prosody_eval::run_cli(args, std::cout, std::cerr);
}
