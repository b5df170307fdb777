#pragma once

#include <cstdint>
#include <string>

#include "r2f/protocol.hpp"

namespace r2f {

/// Blocking stream transport over TCP carrying framed Messages, with an
/// optional token-bucket throttle on the sending side that holds the
/// long-run send rate within +-10% of the configured bits/second.
class SocketTransport {
 public:
  SocketTransport() = default;
  SocketTransport(SocketTransport&& o) noexcept;
  SocketTransport& operator=(SocketTransport&& o) noexcept;
  SocketTransport(const SocketTransport&) = delete;
  SocketTransport& operator=(const SocketTransport&) = delete;
  ~SocketTransport();

  /// Binds, listens, and accepts exactly one peer.
  static SocketTransport listen_accept(const std::string& bind_addr,
                                       uint16_t port);
  static SocketTransport connect_to(const std::string& host, uint16_t port);

  /// Caps outgoing throughput at rate_bps (0 disables the throttle).
  void set_send_rate(double rate_bps);

  void send_message(const Message& m);
  Message recv_message();

  bool open() const { return fd_ >= 0; }
  void close_conn();

 private:
  explicit SocketTransport(int fd) : fd_(fd) {}
  void send_all(const uint8_t* p, size_t n);
  void recv_all(uint8_t* p, size_t n);

  int fd_ = -1;
  double rate_bps_ = 0.0;
  double tokens_ = 0.0;           // bytes available to send
  double bucket_cap_ = 0.0;       // bytes
  double last_refill_ = 0.0;      // monotonic seconds
};

/// Parses "host:port"; empty host keeps dflt_host.
std::pair<std::string, uint16_t> parse_endpoint(const std::string& s,
                                                const std::string& dflt_host);

}  // namespace r2f
