#pragma once

#include <csignal>
#include <functional>
#include <thread>

// Blocks SIGINT and SIGTERM in every thread started afterwards and runs
// `on_stop` on a dedicated thread when one arrives.
inline std::thread watch_stop_signals(std::function<void()> on_stop) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return std::thread([set, on_stop = std::move(on_stop)] {
    int sig = 0;
    sigwait(&set, &sig);
    on_stop();
  });
}
