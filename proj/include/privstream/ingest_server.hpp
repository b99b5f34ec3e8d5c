#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <thread>
#include <vector>

#include "privstream/aggregator.hpp"

namespace privstream {

// Length-delimited TCP front end for Aggregator::accept_answer. Each frame
// carries one submission record; each gets a two-byte reply: accept/reject,
// then the reason code. Loopback only; transport security is out of scope.
class IngestServer {
 public:
  // port 0 binds an ephemeral port; read it back with port().
  explicit IngestServer(Aggregator& aggregator, std::uint16_t port = 0);
  ~IngestServer();

  IngestServer(const IngestServer&) = delete;
  IngestServer& operator=(const IngestServer&) = delete;

  std::uint16_t port() const { return port_; }

  // Stops accepting, shuts down open connections, joins all threads.
  void stop();

 private:
  void accept_loop();
  void client_loop(int fd);

  Aggregator& aggregator_;
  std::uint16_t port_ = 0;
  int listen_fd_ = -1;
  std::atomic<bool> stopping_{false};
  std::thread accept_thread_;
  std::mutex clients_m_;
  std::vector<int> client_fds_;
  std::vector<std::thread> client_threads_;
};

}  // namespace privstream
