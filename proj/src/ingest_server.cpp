#include "privstream/ingest_server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "privstream/errors.hpp"
#include "privstream/wire.hpp"

namespace privstream {

namespace {

void send_all(int fd, const char* data, std::size_t size) {
  std::size_t sent = 0;
  while (sent < size) {
    ssize_t n = ::send(fd, data + sent, size - sent, MSG_NOSIGNAL);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) continue;
      return;  // peer gone; the read side will observe the close
    }
    sent += static_cast<std::size_t>(n);
  }
}

}  // namespace

IngestServer::IngestServer(Aggregator& aggregator, std::uint16_t port)
    : aggregator_(aggregator) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) {
    throw IoError(std::string("socket: ") + std::strerror(errno));
  }
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) <
      0) {
    int err = errno;
    ::close(listen_fd_);
    throw IoError(std::string("bind: ") + std::strerror(err));
  }
  if (::listen(listen_fd_, 64) < 0) {
    int err = errno;
    ::close(listen_fd_);
    throw IoError(std::string("listen: ") + std::strerror(err));
  }
  socklen_t len = sizeof(addr);
  if (::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len) <
      0) {
    int err = errno;
    ::close(listen_fd_);
    throw IoError(std::string("getsockname: ") + std::strerror(err));
  }
  port_ = ntohs(addr.sin_port);
  accept_thread_ = std::thread([this] { accept_loop(); });
}

IngestServer::~IngestServer() { stop(); }

void IngestServer::stop() {
  bool expected = false;
  if (!stopping_.compare_exchange_strong(expected, true)) {
    if (accept_thread_.joinable()) accept_thread_.join();
    return;
  }
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  {
    std::lock_guard lock(clients_m_);
    for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
  }
  if (accept_thread_.joinable()) accept_thread_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(clients_m_);
    workers.swap(client_threads_);
  }
  for (std::thread& t : workers) {
    if (t.joinable()) t.join();
  }
}

void IngestServer::accept_loop() {
  while (!stopping_.load()) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;  // listener closed
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    std::lock_guard lock(clients_m_);
    if (stopping_.load()) {
      ::close(fd);
      break;
    }
    client_fds_.push_back(fd);
    client_threads_.emplace_back([this, fd] { client_loop(fd); });
  }
}

void IngestServer::client_loop(int fd) {
  FrameReader frames;
  char buf[16384];
  bool corrupt = false;
  while (!corrupt) {
    ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    frames.append(buf, static_cast<std::size_t>(n));
    while (true) {
      std::optional<std::string> payload;
      try {
        payload = frames.next();
      } catch (const ParseError&) {
        corrupt = true;  // oversized frame; stream is unrecoverable
      }
      if (corrupt || !payload) break;
      char reply[2];
      try {
        Submission submission = parse_submission(*payload);
        AcceptReason reason = aggregator_.accept_answer(submission);
        reply[0] = reason == AcceptReason::ok ? 0 : 1;
        reply[1] = static_cast<char>(reason);
      } catch (const ParseError&) {
        reply[0] = 1;
        reply[1] = static_cast<char>(AcceptReason::parse_error);
      } catch (const RoutingError&) {
        reply[0] = 1;
        reply[1] = static_cast<char>(AcceptReason::unknown_query);
      }
      send_all(fd, reply, sizeof(reply));
    }
  }
  ::close(fd);
}

}  // namespace privstream
