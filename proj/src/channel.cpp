#include "r2f/channel.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>

namespace r2f {

namespace {

double mono_now() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

[[noreturn]] void sys_fail(const std::string& what) {
  throw ProtocolError(what + ": " + std::strerror(errno));
}

sockaddr_in make_addr(const std::string& host, uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (host.empty() || host == "0.0.0.0") {
    addr.sin_addr.s_addr = INADDR_ANY;
  } else if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw ConfigError("bad IPv4 address '" + host + "'");
  }
  return addr;
}

}  // namespace

SocketTransport::SocketTransport(SocketTransport&& o) noexcept {
  *this = std::move(o);
}

SocketTransport& SocketTransport::operator=(SocketTransport&& o) noexcept {
  if (this != &o) {
    close_conn();
    fd_ = o.fd_;
    rate_bps_ = o.rate_bps_;
    tokens_ = o.tokens_;
    bucket_cap_ = o.bucket_cap_;
    last_refill_ = o.last_refill_;
    o.fd_ = -1;
  }
  return *this;
}

SocketTransport::~SocketTransport() { close_conn(); }

void SocketTransport::close_conn() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

SocketTransport SocketTransport::listen_accept(const std::string& bind_addr,
                                               uint16_t port) {
  int lfd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (lfd < 0) sys_fail("socket");
  int one = 1;
  ::setsockopt(lfd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = make_addr(bind_addr, port);
  if (::bind(lfd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    ::close(lfd);
    sys_fail("bind");
  }
  if (::listen(lfd, 1) < 0) {
    ::close(lfd);
    sys_fail("listen");
  }
  int fd = ::accept(lfd, nullptr, nullptr);
  ::close(lfd);
  if (fd < 0) sys_fail("accept");
  int nd = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &nd, sizeof(nd));
  return SocketTransport(fd);
}

SocketTransport SocketTransport::connect_to(const std::string& host,
                                            uint16_t port) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) sys_fail("socket");
  sockaddr_in addr = make_addr(host.empty() ? "127.0.0.1" : host, port);
  // The peer may still be coming up; retry briefly.
  for (int attempt = 0;; ++attempt) {
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0)
      break;
    if (attempt >= 50) {
      ::close(fd);
      sys_fail("connect");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  int nd = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &nd, sizeof(nd));
  return SocketTransport(fd);
}

void SocketTransport::set_send_rate(double rate_bps) {
  rate_bps_ = rate_bps;
  // A small bucket keeps the rate smooth at sub-second windows: 50 ms of
  // traffic, at least one 4 KiB chunk.
  bucket_cap_ = std::max(rate_bps / 8.0 * 0.05, 4096.0);
  tokens_ = bucket_cap_;
  last_refill_ = mono_now();
}

void SocketTransport::send_all(const uint8_t* p, size_t n) {
  constexpr size_t kChunk = 4096;
  size_t off = 0;
  while (off < n) {
    size_t want = std::min(kChunk, n - off);
    if (rate_bps_ > 0) {
      for (;;) {
        double now = mono_now();
        tokens_ = std::min(bucket_cap_,
                           tokens_ + (now - last_refill_) * rate_bps_ / 8.0);
        last_refill_ = now;
        if (tokens_ >= double(want)) {
          tokens_ -= double(want);
          break;
        }
        double deficit = double(want) - tokens_;
        std::this_thread::sleep_for(
            std::chrono::duration<double>(deficit * 8.0 / rate_bps_));
      }
    }
    ssize_t sent = ::send(fd_, p + off, want, MSG_NOSIGNAL);
    if (sent <= 0) {
      if (sent < 0 && errno == EINTR) continue;
      sys_fail("send");
    }
    off += size_t(sent);
  }
}

void SocketTransport::recv_all(uint8_t* p, size_t n) {
  size_t off = 0;
  while (off < n) {
    ssize_t got = ::recv(fd_, p + off, n - off, 0);
    if (got == 0) throw ProtocolError("connection closed by peer");
    if (got < 0) {
      if (errno == EINTR) continue;
      sys_fail("recv");
    }
    off += size_t(got);
  }
}

void SocketTransport::send_message(const Message& m) {
  if (fd_ < 0) throw ProtocolError("transport not connected");
  Bytes frame = encode_message(m);
  send_all(frame.data(), frame.size());
}

Message SocketTransport::recv_message() {
  if (fd_ < 0) throw ProtocolError("transport not connected");
  uint8_t header[kMsgHeaderBytes];
  recv_all(header, sizeof(header));
  uint64_t len = 0;
  for (int i = 0; i < 8; ++i)
    len |= uint64_t(header[9 + i]) << (8 * i);
  if (len > (uint64_t(1) << 30))
    throw DecodeError("frame payload of " + std::to_string(len) +
                      " bytes exceeds 1 GiB cap");
  Bytes frame(sizeof(header) + len);
  std::memcpy(frame.data(), header, sizeof(header));
  if (len > 0) recv_all(frame.data() + sizeof(header), len);
  return decode_message(frame);
}

std::pair<std::string, uint16_t> parse_endpoint(const std::string& s,
                                                const std::string& dflt_host) {
  auto colon = s.rfind(':');
  if (colon == std::string::npos)
    throw ConfigError("endpoint '" + s + "' is not host:port");
  std::string host = s.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(s.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("bad port in endpoint '" + s + "'");
  }
  if (port <= 0 || port > 65535)
    throw ConfigError("port " + std::to_string(port) + " out of range");
  return {host.empty() ? dflt_host : host, static_cast<uint16_t>(port)};
}

}  // namespace r2f
