#include "piw/server.hpp"

#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include "piw/error.hpp"

namespace piw::stream {

ListenAddress parse_listen_address(const std::string& text) {
  ListenAddress addr;
  std::string host;
  std::string port;
  if (!text.empty() && text.front() == '[') {
    const auto close = text.find(']');
    if (close == std::string::npos || close + 1 >= text.size() || text[close + 1] != ':') {
      fail(Errc::InvalidArgument, "bad listen address '" + text + "'");
    }
    host = text.substr(1, close - 1);
    port = text.substr(close + 2);
  } else {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos) fail(Errc::InvalidArgument, "listen address needs HOST:PORT, got '" + text + "'");
    host = text.substr(0, colon);
    port = text.substr(colon + 1);
  }
  if (!host.empty()) addr.host = host;
  try {
    std::size_t used = 0;
    const int value = std::stoi(port, &used);
    if (used != port.size() || value < 0 || value > 65535) throw std::out_of_range("port");
    addr.port = static_cast<std::uint16_t>(value);
  } catch (const std::exception&) {
    fail(Errc::InvalidArgument, "bad port in listen address '" + text + "'");
  }
  return addr;
}

Server::Server(std::shared_ptr<const StreamContext> ctx) : ctx_(std::move(ctx)) {
  if (!ctx_) fail(Errc::InvalidArgument, "server needs a context");
  ctx_->validate();
}

Server::~Server() { stop(); }

std::uint16_t Server::listen(const ListenAddress& address) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE | AI_NUMERICSERV;
  addrinfo* found = nullptr;
  const std::string port = std::to_string(address.port);
  if (const int rc = ::getaddrinfo(address.host.c_str(), port.c_str(), &hints, &found); rc != 0) {
    fail(Errc::BindFailure, "cannot resolve '" + address.host + "': " + ::gai_strerror(rc));
  }
  std::string last_error = "no usable address";
  for (auto* ai = found; ai != nullptr; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) {
      last_error = std::strerror(errno);
      continue;
    }
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 64) == 0) {
      listen_fd_ = fd;
      break;
    }
    last_error = std::strerror(errno);
    ::close(fd);
  }
  ::freeaddrinfo(found);
  if (listen_fd_ < 0) {
    fail(Errc::BindFailure, "cannot listen on " + address.host + ":" + port + ": " + last_error);
  }
  sockaddr_storage bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  char service[NI_MAXSERV] = {};
  ::getnameinfo(reinterpret_cast<sockaddr*>(&bound), len, nullptr, 0, service, sizeof(service), NI_NUMERICSERV);
  return static_cast<std::uint16_t>(std::stoi(service));
}

void Server::serve() {
  if (listen_fd_ < 0) fail(Errc::InvalidArgument, "serve() before listen()");
  while (!stopping_.load()) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, 100);
    if (ready <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    std::lock_guard lock(mutex_);
    if (stopping_.load()) {
      ::close(fd);
      break;
    }
    reap_finished();
    client_fds_.push_back(fd);
    ++sessions_started_;
    workers_.emplace_back([this, fd] { handle(fd); });
  }
}

void Server::start() {
  accept_thread_ = std::thread([this] { serve(); });
}

void Server::stop() {
  stopping_.store(true);
  if (accept_thread_.joinable()) accept_thread_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mutex_);
    for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& w : workers) {
    if (w.joinable()) w.join();
  }
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
}

namespace {

bool send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const auto n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

void Server::handle(int fd) {
  LineProtocol protocol(ctx_);
  std::string pending;
  char buf[8192];
  bool ok = true;
  while (ok) {
    const auto n = ::recv(fd, buf, sizeof(buf), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    pending.append(buf, static_cast<std::size_t>(n));
    std::size_t start = 0;
    std::string replies;
    for (auto nl = pending.find('\n', start); nl != std::string::npos; nl = pending.find('\n', start)) {
      for (const auto& reply : protocol.on_line(std::string_view(pending).substr(start, nl - start))) {
        replies += reply;
        replies += '\n';
      }
      start = nl + 1;
    }
    pending.erase(0, start);
    if (!replies.empty()) ok = send_all(fd, replies);
  }
  if (ok) {
    std::string tail;
    if (!pending.empty()) {
      for (const auto& reply : protocol.on_line(pending)) tail += reply + '\n';
    }
    tail += protocol.on_eof() + '\n';
    send_all(fd, tail);
  }
  ::shutdown(fd, SHUT_WR);
  std::lock_guard lock(mutex_);
  client_fds_.erase(std::remove(client_fds_.begin(), client_fds_.end(), fd), client_fds_.end());
  ::close(fd);
  finished_.push_back(std::this_thread::get_id());
}

void Server::reap_finished() {
  for (const auto id : finished_) {
    const auto it = std::find_if(workers_.begin(), workers_.end(), [id](const std::thread& t) { return t.get_id() == id; });
    if (it != workers_.end()) {
      it->join();
      workers_.erase(it);
    }
  }
  finished_.clear();
}

}  // namespace piw::stream
