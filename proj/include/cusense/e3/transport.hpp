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

#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace cusense::e3 {

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TimeoutError : public TransportError {
 public:
  using TransportError::TransportError;
};

// "unix:/path/to/socket" or "tcp:host:port" (host must be a numeric IPv4 address).
struct Endpoint {
  enum class Kind { kUnix, kTcp };
  Kind kind{Kind::kUnix};
  std::string path;
  std::string host;
  std::uint16_t port{0};

  static Endpoint parse(const std::string& text);
  std::string to_string() const;
};

// Owning file descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  int fd() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }
  int release() noexcept;
  void close() noexcept;
  // Wakes a thread blocked in recv/accept on this socket.
  void shutdown() noexcept;

 private:
  int fd_{-1};
};

Socket listen_on(const Endpoint& ep, int backlog = 16);
// Retries refused/missing endpoints until the deadline, then throws TimeoutError.
Socket connect_to(const Endpoint& ep, std::chrono::milliseconds timeout);
Socket accept_from(const Socket& listener);

// Blocking helpers. recv_some returns 0 on orderly shutdown.
void send_all(int fd, std::span<const std::uint8_t> bytes);
std::size_t recv_some(int fd, std::span<std::uint8_t> buf);
// Non-blocking send; returns bytes written (possibly 0 when the kernel buffer is full).
std::size_t send_nonblocking(int fd, std::span<const std::uint8_t> bytes);
// Waits until fd is readable (or writable); false on timeout.
bool wait_readable(int fd, std::chrono::milliseconds timeout);
bool wait_writable(int fd, std::chrono::milliseconds timeout);

}  // namespace cusense::e3
