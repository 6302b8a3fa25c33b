#pragma once

// TCP front end for the stream protocol: each connection is an independent
// session fed with newline-delimited JSON records.

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "piw/stream.hpp"

namespace piw::stream {

struct ListenAddress {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

/// "HOST:PORT", "[v6]:PORT" or ":PORT".
ListenAddress parse_listen_address(const std::string& text);

class Server {
 public:
  explicit Server(std::shared_ptr<const StreamContext> ctx);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and listens; returns the bound port (useful with port 0).
  std::uint16_t listen(const ListenAddress& address);

  /// Accept loop; returns after stop().
  void serve();

  /// Runs serve() on a background thread.
  void start();

  /// Stops accepting, closes live connections and joins all threads.
  void stop();

  std::size_t sessions_started() const { return sessions_started_.load(); }

 private:
  void handle(int fd);
  /// Joins workers whose sessions ended. Caller holds mutex_.
  void reap_finished();

  std::shared_ptr<const StreamContext> ctx_;
  int listen_fd_ = -1;
  std::atomic<bool> stopping_{false};
  std::atomic<std::size_t> sessions_started_{0};
  std::thread accept_thread_;
  std::mutex mutex_;
  std::vector<std::thread> workers_;
  std::vector<int> client_fds_;
  std::vector<std::thread::id> finished_;
};

}  // namespace piw::stream
