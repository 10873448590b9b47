/*
 * SPDX-FileCopyrightText: Copyright (c) 2026 The cusense Authors. All rights reserved.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cusense/e3/transport.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <thread>
#include <unistd.h>

namespace cusense::e3 {
namespace {

[[noreturn]] void fail(const std::string& what) {
  throw TransportError(what + ": " + std::strerror(errno));
}

struct SockAddr {
  sockaddr_storage storage{};
  socklen_t len{0};
  int family{AF_UNIX};
};

SockAddr make_addr(const Endpoint& ep) {
  SockAddr a;
  if (ep.kind == Endpoint::Kind::kUnix) {
    auto* un = reinterpret_cast<sockaddr_un*>(&a.storage);
    if (ep.path.size() >= sizeof(un->sun_path)) throw TransportError("unix socket path too long: " + ep.path);
    un->sun_family = AF_UNIX;
    std::memcpy(un->sun_path, ep.path.c_str(), ep.path.size() + 1);
    a.len = sizeof(sockaddr_un);
    a.family = AF_UNIX;
  } else {
    auto* in = reinterpret_cast<sockaddr_in*>(&a.storage);
    in->sin_family = AF_INET;
    in->sin_port = htons(ep.port);
    if (inet_pton(AF_INET, ep.host.c_str(), &in->sin_addr) != 1) {
      throw TransportError("invalid IPv4 address: " + ep.host);
    }
    a.len = sizeof(sockaddr_in);
    a.family = AF_INET;
  }
  return a;
}

void tune(int fd, int family) {
  if (family == AF_INET) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
}

bool wait_events(int fd, short events, std::chrono::milliseconds timeout) {
  pollfd p{fd, events, 0};
  for (;;) {
    const int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (rc < 0 && errno == EINTR) continue;
    if (rc < 0) fail("poll");
    return rc > 0;
  }
}

}  // namespace

Endpoint Endpoint::parse(const std::string& text) {
  Endpoint ep;
  if (text.rfind("unix:", 0) == 0) {
    ep.kind = Kind::kUnix;
    ep.path = text.substr(5);
    if (ep.path.empty()) throw TransportError("empty unix socket path");
    return ep;
  }
  if (text.rfind("tcp:", 0) == 0) {
    const auto rest = text.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) throw TransportError("tcp endpoint needs host:port: " + text);
    ep.kind = Kind::kTcp;
    ep.host = rest.substr(0, colon);
    int port = 0;
    try {
      port = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw TransportError("invalid tcp port in " + text);
    }
    if (port <= 0 || port > 65535) throw TransportError("invalid tcp port in " + text);
    ep.port = static_cast<std::uint16_t>(port);
    return ep;
  }
  throw TransportError("endpoint must start with unix: or tcp: (got '" + text + "')");
}

std::string Endpoint::to_string() const {
  if (kind == Kind::kUnix) return "unix:" + path;
  return "tcp:" + host + ":" + std::to_string(port);
}

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.release();
  }
  return *this;
}

int Socket::release() noexcept {
  const int fd = fd_;
  fd_ = -1;
  return fd;
}

void Socket::close() noexcept {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void Socket::shutdown() noexcept {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

Socket listen_on(const Endpoint& ep, int backlog) {
  const auto addr = make_addr(ep);
  Socket s(::socket(addr.family, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) fail("socket");
  if (ep.kind == Endpoint::Kind::kUnix) {
    ::unlink(ep.path.c_str());
  } else {
    int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  }
  if (::bind(s.fd(), reinterpret_cast<const sockaddr*>(&addr.storage), addr.len) != 0) {
    fail("bind " + ep.to_string());
  }
  if (::listen(s.fd(), backlog) != 0) fail("listen " + ep.to_string());
  return s;
}

Socket connect_to(const Endpoint& ep, std::chrono::milliseconds timeout) {
  const auto addr = make_addr(ep);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    Socket s(::socket(addr.family, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!s.valid()) fail("socket");
    if (::connect(s.fd(), reinterpret_cast<const sockaddr*>(&addr.storage), addr.len) == 0) {
      tune(s.fd(), addr.family);
      return s;
    }
    const int err = errno;
    if (err != ECONNREFUSED && err != ENOENT && err != EAGAIN && err != EINTR) {
      errno = err;
      fail("connect " + ep.to_string());
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      throw TimeoutError("timed out connecting to " + ep.to_string());
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

Socket accept_from(const Socket& listener) {
  for (;;) {
    const int fd = ::accept4(listener.fd(), nullptr, nullptr, SOCK_CLOEXEC);
    if (fd >= 0) {
      sockaddr_storage ss{};
      socklen_t len = sizeof(ss);
      ::getsockname(fd, reinterpret_cast<sockaddr*>(&ss), &len);
      tune(fd, ss.ss_family);
      return Socket(fd);
    }
    if (errno == EINTR || errno == ECONNABORTED) continue;
    fail("accept");
  }
}

void send_all(int fd, std::span<const std::uint8_t> bytes) {
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n = ::send(fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) {
        wait_writable(fd, std::chrono::milliseconds(100));
        continue;
      }
      fail("send");
    }
    off += static_cast<std::size_t>(n);
  }
}

std::size_t send_nonblocking(int fd, std::span<const std::uint8_t> bytes) {
  for (;;) {
    const ssize_t n = ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL | MSG_DONTWAIT);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno == EINTR) continue;
    if (errno == EAGAIN || errno == EWOULDBLOCK) return 0;
    fail("send");
  }
}

std::size_t recv_some(int fd, std::span<std::uint8_t> buf) {
  for (;;) {
    const ssize_t n = ::recv(fd, buf.data(), buf.size(), 0);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno == EINTR) continue;
    if (errno == ECONNRESET) return 0;
    fail("recv");
  }
}

bool wait_readable(int fd, std::chrono::milliseconds timeout) { return wait_events(fd, POLLIN, timeout); }
bool wait_writable(int fd, std::chrono::milliseconds timeout) { return wait_events(fd, POLLOUT, timeout); }

}  // namespace cusense::e3
