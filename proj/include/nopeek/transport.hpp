#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "nopeek/wire.hpp"

namespace nopeek {

/// Frame-oriented, blocking, ordered byte channel. recv() returns exactly one
/// encoded frame. A closed or broken peer raises kIo.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(std::span<const std::uint8_t> frame) = 0;
  virtual std::vector<std::uint8_t> recv() = 0;
  virtual void close() = 0;

  void send_message(const wire::WireMessage& m);
  wire::WireMessage recv_message();
};

/// In-memory pair sharing the byte contract of the socket transport.
std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_loopback_pair();

/// POSIX stream socket. Frames are read as a 17-byte header then payload_len
/// bytes, so framing errors surface with the wire error codes.
class TcpTransport final : public Transport {
 public:
  /// Blocks until one client connects to `port` (0.0.0.0).
  static std::unique_ptr<TcpTransport> accept_one(std::uint16_t port);
  /// `addr` is "host:port" or "host" with `default_port`. Retries until
  /// `timeout_ms` while the server comes up.
  static std::unique_ptr<TcpTransport> connect(const std::string& addr, std::uint16_t default_port,
                                               int timeout_ms = 10000);

  ~TcpTransport() override;
  void send(std::span<const std::uint8_t> frame) override;
  std::vector<std::uint8_t> recv() override;
  void close() override;

 private:
  explicit TcpTransport(int fd) : fd_(fd) {}
  void read_exact(std::uint8_t* dst, std::size_t n);
  int fd_ = -1;
};

/// Records every frame that passes through another transport.
class CapturingTransport final : public Transport {
 public:
  enum class Direction { kSent, kReceived };
  struct Record {
    Direction direction;
    std::vector<std::uint8_t> frame;
  };

  explicit CapturingTransport(Transport& inner) : inner_(inner) {}

  void send(std::span<const std::uint8_t> frame) override;
  std::vector<std::uint8_t> recv() override;
  void close() override { inner_.close(); }

  std::vector<Record> records() const;
  std::size_t bytes_sent() const;
  std::size_t bytes_total() const;

 private:
  Transport& inner_;
  mutable std::mutex mu_;
  std::vector<Record> records_;
};

}  // namespace nopeek
