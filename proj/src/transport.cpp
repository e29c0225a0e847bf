#include "nopeek/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <thread>

#include "nopeek/errors.hpp"

namespace nopeek {

void Transport::send_message(const wire::WireMessage& m) { send(wire::encode(m)); }

wire::WireMessage Transport::recv_message() { return wire::decode(recv()); }

namespace {

struct Channel {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::vector<std::uint8_t>> frames;
  bool closed = false;
};

class LoopbackTransport final : public Transport {
 public:
  LoopbackTransport(std::shared_ptr<Channel> out, std::shared_ptr<Channel> in) : out_(std::move(out)), in_(std::move(in)) {}
  ~LoopbackTransport() override { close(); }

  void send(std::span<const std::uint8_t> frame) override {
    // Validate framing exactly like a socket reader would.
    wire::decode_header(frame);
    std::lock_guard lock(out_->mu);
    require(!out_->closed, ErrorCode::kIo, "loopback peer closed");
    out_->frames.emplace_back(frame.begin(), frame.end());
    out_->cv.notify_all();
  }

  std::vector<std::uint8_t> recv() override {
    std::unique_lock lock(in_->mu);
    in_->cv.wait(lock, [&] { return !in_->frames.empty() || in_->closed; });
    require(!in_->frames.empty(), ErrorCode::kIo, "loopback connection closed");
    auto f = std::move(in_->frames.front());
    in_->frames.pop_front();
    return f;
  }

  void close() override {
    for (auto* ch : {out_.get(), in_.get()}) {
      std::lock_guard lock(ch->mu);
      ch->closed = true;
      ch->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<Channel> out_;
  std::shared_ptr<Channel> in_;
};

std::string errno_text() { return std::strerror(errno); }

}  // namespace

std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_loopback_pair() {
  auto a_to_b = std::make_shared<Channel>();
  auto b_to_a = std::make_shared<Channel>();
  return {std::make_unique<LoopbackTransport>(a_to_b, b_to_a), std::make_unique<LoopbackTransport>(b_to_a, a_to_b)};
}

std::unique_ptr<TcpTransport> TcpTransport::accept_one(std::uint16_t port) {
  const int lfd = ::socket(AF_INET, SOCK_STREAM, 0);
  require(lfd >= 0, ErrorCode::kIo, "socket: " + errno_text());
  int one = 1;
  ::setsockopt(lfd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_addr.s_addr = htonl(INADDR_ANY);
  sa.sin_port = htons(port);
  if (::bind(lfd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0 || ::listen(lfd, 1) != 0) {
    const std::string msg = errno_text();
    ::close(lfd);
    fail(ErrorCode::kIo, "cannot listen on port " + std::to_string(port) + ": " + msg);
  }
  const int fd = ::accept(lfd, nullptr, nullptr);
  ::close(lfd);
  require(fd >= 0, ErrorCode::kIo, "accept: " + errno_text());
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return std::unique_ptr<TcpTransport>(new TcpTransport(fd));
}

std::unique_ptr<TcpTransport> TcpTransport::connect(const std::string& addr, std::uint16_t default_port,
                                                    int timeout_ms) {
  std::string host = addr;
  std::string port = std::to_string(default_port);
  if (const auto colon = addr.rfind(':'); colon != std::string::npos) {
    host = addr.substr(0, colon);
    port = addr.substr(colon + 1);
  }
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0)
    fail(ErrorCode::kConfig, "cannot resolve '" + addr + "': " + ::gai_strerror(rc));
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  int fd = -1;
  while (true) {
    fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd >= 0 && ::connect(fd, res->ai_addr, res->ai_addrlen) == 0) break;
    if (fd >= 0) ::close(fd);
    fd = -1;
    if (std::chrono::steady_clock::now() >= deadline) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  ::freeaddrinfo(res);
  require(fd >= 0, ErrorCode::kIo, "cannot connect to " + addr);
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return std::unique_ptr<TcpTransport>(new TcpTransport(fd));
}

TcpTransport::~TcpTransport() { close(); }

void TcpTransport::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

void TcpTransport::send(std::span<const std::uint8_t> frame) {
  require(fd_ >= 0, ErrorCode::kIo, "socket closed");
  std::size_t off = 0;
  while (off < frame.size()) {
    const ssize_t k = ::send(fd_, frame.data() + off, frame.size() - off, MSG_NOSIGNAL);
    if (k < 0 && errno == EINTR) continue;
    require(k > 0, ErrorCode::kIo, "send: " + errno_text());
    off += static_cast<std::size_t>(k);
  }
}

void TcpTransport::read_exact(std::uint8_t* dst, std::size_t n) {
  std::size_t off = 0;
  while (off < n) {
    const ssize_t k = ::recv(fd_, dst + off, n - off, 0);
    if (k < 0 && errno == EINTR) continue;
    require(k > 0, ErrorCode::kIo, k == 0 ? "connection closed by peer" : "recv: " + errno_text());
    off += static_cast<std::size_t>(k);
  }
}

std::vector<std::uint8_t> TcpTransport::recv() {
  require(fd_ >= 0, ErrorCode::kIo, "socket closed");
  std::vector<std::uint8_t> frame(wire::kHeaderSize);
  read_exact(frame.data(), frame.size());
  const wire::FrameHeader h = wire::decode_header(frame);
  require(h.payload_len <= wire::kMaxPayload, ErrorCode::kMalformedFrame, "payload_len exceeds limit");
  frame.resize(wire::kHeaderSize + h.payload_len);
  read_exact(frame.data() + wire::kHeaderSize, h.payload_len);
  return frame;
}

void CapturingTransport::send(std::span<const std::uint8_t> frame) {
  {
    std::lock_guard lock(mu_);
    records_.push_back({Direction::kSent, {frame.begin(), frame.end()}});
  }
  inner_.send(frame);
}

std::vector<std::uint8_t> CapturingTransport::recv() {
  auto f = inner_.recv();
  std::lock_guard lock(mu_);
  records_.push_back({Direction::kReceived, f});
  return f;
}

std::vector<CapturingTransport::Record> CapturingTransport::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::size_t CapturingTransport::bytes_sent() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const Record& r : records_)
    if (r.direction == Direction::kSent) n += r.frame.size();
  return n;
}

std::size_t CapturingTransport::bytes_total() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const Record& r : records_) n += r.frame.size();
  return n;
}

}  // namespace nopeek
