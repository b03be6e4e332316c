#include "spkm/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <thread>

#include "spkm/errors.hpp"

namespace spkm {

const char* role_name(Role r) { return r == Role::A ? "A" : "B"; }

const char* phase_name(Phase p) { return p == Phase::Offline ? "offline" : "online"; }

const char* step_name(Step s) {
  switch (s) {
    case Step::S1: return "S1";
    case Step::S2: return "S2";
    case Step::S3: return "S3";
    default: return "other";
  }
}

std::array<std::uint8_t, kFrameHeaderBytes> encode_frame_header(const Frame& f) {
  const auto len = static_cast<std::uint32_t>(f.payload.size());
  return {static_cast<std::uint8_t>(len), static_cast<std::uint8_t>(len >> 8),
          static_cast<std::uint8_t>(len >> 16), static_cast<std::uint8_t>(len >> 24),
          static_cast<std::uint8_t>(f.type), static_cast<std::uint8_t>(f.phase),
          static_cast<std::uint8_t>(f.step)};
}

std::size_t decode_frame_header(const std::array<std::uint8_t, kFrameHeaderBytes>& h, Frame& f,
                                std::size_t max_len) {
  const std::size_t len = std::size_t{h[0]} | std::size_t{h[1]} << 8 | std::size_t{h[2]} << 16 |
                          std::size_t{h[3]} << 24;
  if (h[4] < 1 || h[4] > 6) throw TransportError("malformed header: unknown msg_type " + std::to_string(h[4]));
  if (h[5] > 1) throw TransportError("malformed header: bad phase tag");
  if (h[6] > 3) throw TransportError("malformed header: bad step tag");
  if (len > max_len) throw TransportError("frame length " + std::to_string(len) + " exceeds limit");
  f.type = static_cast<MsgType>(h[4]);
  f.phase = static_cast<Phase>(h[5]);
  f.step = static_cast<Step>(h[6]);
  return len;
}

MetricsCell& MetricsCell::operator+=(const MetricsCell& o) {
  bytes_sent += o.bytes_sent;
  bytes_received += o.bytes_received;
  rounds += o.rounds;
  dealer_bytes += o.dealer_bytes;
  wall_seconds += o.wall_seconds;
  return *this;
}

MetricsCell RunMetrics::phase_total(Phase p) const {
  MetricsCell t;
  for (const auto& c : cells[static_cast<int>(p)]) t += c;
  return t;
}

MetricsCell RunMetrics::step_total(Step s) const {
  MetricsCell t;
  for (const auto& row : cells) t += row[static_cast<int>(s)];
  return t;
}

MetricsCell RunMetrics::total() const {
  MetricsCell t = phase_total(Phase::Offline);
  t += phase_total(Phase::Online);
  return t;
}

RunMetrics MetricsRecorder::snapshot() const {
  RunMetrics m;
  for (int p = 0; p < 2; ++p) {
    for (int s = 0; s < 4; ++s) {
      const Cell& c = cells_[p][s];
      MetricsCell& o = m.cells[p][s];
      o.bytes_sent = c.sent.load();
      o.bytes_received = c.received.load();
      o.rounds = c.rounds.load();
      o.dealer_bytes = c.dealer.load();
      o.wall_seconds = static_cast<double>(c.nanos.load()) * 1e-9;
    }
  }
  return m;
}

void Channel::send(const Frame& f) {
  if (f.payload.size() > max_frame_) {
    throw TransportError("frame length " + std::to_string(f.payload.size()) + " exceeds limit");
  }
  const auto header = encode_frame_header(f);
  std::vector<std::uint8_t> wire;
  wire.reserve(kFrameHeaderBytes + f.payload.size());
  wire.insert(wire.end(), header.begin(), header.end());
  wire.insert(wire.end(), f.payload.begin(), f.payload.end());
  write_wire(std::move(wire));
  metrics_.add_sent(f.phase, f.step, kFrameHeaderBytes + f.payload.size());
  note(true, f);
}

Frame Channel::recv() {
  std::array<std::uint8_t, kFrameHeaderBytes> header{};
  read_wire(header.data(), header.size());
  Frame f;
  const std::size_t len = decode_frame_header(header, f, max_frame_);
  f.payload.resize(len);
  if (len > 0) read_wire(f.payload.data(), len);
  metrics_.add_received(f.phase, f.step, kFrameHeaderBytes + len);
  note(false, f);
  return f;
}

void Channel::send_msg(MsgType t, std::vector<std::uint8_t> payload) {
  send(Frame{t, phase_, step_, std::move(payload)});
  metrics_.add_round(phase_, step_);
}

std::vector<std::uint8_t> Channel::recv_msg(MsgType expected) {
  Frame f = recv();
  if (f.type != expected) {
    throw TransportError("expected msg_type " + std::to_string(static_cast<int>(expected)) + ", got " +
                         std::to_string(static_cast<int>(f.type)));
  }
  metrics_.add_round(phase_, step_);
  return std::move(f.payload);
}

std::vector<std::uint8_t> Channel::exchange(MsgType t, std::vector<std::uint8_t> payload) {
  Frame out{t, phase_, step_, std::move(payload)};
  Frame in;
  if (writes_may_block()) {
    std::exception_ptr send_error;
    std::thread sender([&] {
      try {
        send(out);
      } catch (...) {
        send_error = std::current_exception();
      }
    });
    try {
      in = recv();
    } catch (...) {
      close();
      sender.join();
      throw;
    }
    sender.join();
    if (send_error) std::rethrow_exception(send_error);
  } else {
    send(out);
    in = recv();
  }
  if (in.type != t) throw TransportError("exchange: peer sent a different msg_type");
  metrics_.add_round(phase_, step_);
  return std::move(in.payload);
}

void Channel::record_transcript(bool on) {
  std::lock_guard lock(transcript_mu_);
  transcript_on_ = on;
}

std::vector<TranscriptEntry> Channel::transcript() const {
  std::lock_guard lock(transcript_mu_);
  return transcript_;
}

void Channel::note(bool outgoing, const Frame& f) {
  std::lock_guard lock(transcript_mu_);
  if (transcript_on_) transcript_.push_back(TranscriptEntry{outgoing, f});
}

StepScope::StepScope(Channel& ch, Phase p, Step s)
    : ch_(ch),
      prev_phase_(ch.phase()),
      phase_(p),
      prev_step_(ch.step()),
      step_(s),
      start_(std::chrono::steady_clock::now()) {
  ch_.set_tags(p, s);
}

StepScope::~StepScope() {
  ch_.metrics().add_wall(phase_, step_, std::chrono::steady_clock::now() - start_);
  ch_.set_tags(prev_phase_, prev_step_);
}

namespace {

struct LoopbackQueue {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::vector<std::uint8_t>> items;
  bool closed = false;
};

class LoopbackChannel : public Channel {
 public:
  LoopbackChannel(Role role, std::shared_ptr<LoopbackQueue> in, std::shared_ptr<LoopbackQueue> out)
      : Channel(role), in_(std::move(in)), out_(std::move(out)) {}
  ~LoopbackChannel() override { close(); }

  void close() override {
    for (auto* q : {in_.get(), out_.get()}) {
      std::lock_guard lock(q->mu);
      q->closed = true;
      q->cv.notify_all();
    }
  }

 protected:
  void write_wire(std::vector<std::uint8_t> wire) override {
    std::lock_guard lock(out_->mu);
    if (out_->closed) throw TransportError("channel closed");
    out_->items.push_back(std::move(wire));
    out_->cv.notify_all();
  }

  void read_wire(std::uint8_t* dst, std::size_t n) override {
    while (n > 0) {
      if (cur_pos_ == cur_.size()) {
        std::unique_lock lock(in_->mu);
        in_->cv.wait(lock, [&] { return !in_->items.empty() || in_->closed; });
        if (in_->items.empty()) throw TransportError("channel closed");
        cur_ = std::move(in_->items.front());
        in_->items.pop_front();
        cur_pos_ = 0;
      }
      const std::size_t k = std::min(n, cur_.size() - cur_pos_);
      std::memcpy(dst, cur_.data() + cur_pos_, k);
      cur_pos_ += k;
      dst += k;
      n -= k;
    }
  }

  bool writes_may_block() const override { return false; }

 private:
  std::shared_ptr<LoopbackQueue> in_, out_;
  std::vector<std::uint8_t> cur_;
  std::size_t cur_pos_ = 0;
};

class TcpChannel : public Channel {
 public:
  TcpChannel(Role role, int fd) : Channel(role), fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }
  ~TcpChannel() override {
    close();
    if (fd_ >= 0) ::close(fd_);
  }

  void close() override {
    if (fd_ >= 0 && !shut_.exchange(true)) ::shutdown(fd_, SHUT_RDWR);
  }

 protected:
  void write_wire(std::vector<std::uint8_t> wire) override {
    std::size_t off = 0;
    while (off < wire.size()) {
      const ssize_t k = ::send(fd_, wire.data() + off, wire.size() - off, MSG_NOSIGNAL);
      if (k < 0 && errno == EINTR) continue;
      if (k <= 0) throw TransportError(std::string("send failed: ") + std::strerror(errno));
      off += static_cast<std::size_t>(k);
    }
  }

  void read_wire(std::uint8_t* dst, std::size_t n) override {
    while (n > 0) {
      const ssize_t k = ::recv(fd_, dst, n, 0);
      if (k < 0 && errno == EINTR) continue;
      if (k == 0) throw TransportError("channel closed");
      if (k < 0) throw TransportError(std::string("recv failed: ") + std::strerror(errno));
      dst += k;
      n -= static_cast<std::size_t>(k);
    }
  }

  bool writes_may_block() const override { return true; }

 private:
  int fd_;
  std::atomic<bool> shut_{false};
};

sockaddr_in resolve(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  addrinfo* res = nullptr;
  if (::getaddrinfo(ep.host.c_str(), nullptr, &hints, &res) != 0 || !res) {
    throw TransportError("cannot resolve host " + ep.host);
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

}  // namespace

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> loopback_pair() {
  auto ab = std::make_shared<LoopbackQueue>();
  auto ba = std::make_shared<LoopbackQueue>();
  return {std::make_unique<LoopbackChannel>(Role::A, ba, ab),
          std::make_unique<LoopbackChannel>(Role::B, ab, ba)};
}

Endpoint Endpoint::parse(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("endpoint must be host:port");
  Endpoint ep;
  ep.host = s.substr(0, colon);
  const int port = std::stoi(s.substr(colon + 1));
  if (port < 0 || port > 65535) throw std::invalid_argument("port out of range");
  ep.port = static_cast<std::uint16_t>(port);
  return ep;
}

TcpListener::TcpListener(const Endpoint& ep) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw TransportError("socket() failed");
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr = resolve(ep);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 1) != 0) {
    const std::string err = std::strerror(errno);
    ::close(fd_);
    throw TransportError("cannot listen on " + ep.host + ":" + std::to_string(ep.port) + ": " + err);
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<Channel> TcpListener::accept(Role role, std::chrono::milliseconds timeout) {
  pollfd p{fd_, POLLIN, 0};
  const int r = ::poll(&p, 1, static_cast<int>(timeout.count()));
  if (r <= 0) throw TransportError("timed out waiting for peer connection");
  const int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) throw TransportError("accept() failed");
  return std::make_unique<TcpChannel>(role, fd);
}

std::unique_ptr<Channel> tcp_dial(Role role, const Endpoint& ep, std::chrono::milliseconds timeout) {
  const sockaddr_in addr = resolve(ep);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw TransportError("socket() failed");
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0) {
      return std::make_unique<TcpChannel>(role, fd);
    }
    ::close(fd);
    if (std::chrono::steady_clock::now() >= deadline) {
      throw TransportError("timed out connecting to " + ep.host + ":" + std::to_string(ep.port));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

std::unique_ptr<Channel> connect(Role role, const Endpoint& ep, std::chrono::milliseconds timeout) {
  if (role == Role::A) {
    TcpListener listener(ep);
    return listener.accept(role, timeout);
  }
  return tcp_dial(role, ep, timeout);
}

}  // namespace spkm
