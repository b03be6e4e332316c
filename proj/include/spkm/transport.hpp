#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace spkm {

enum class Role : std::uint8_t { A = 0, B = 1 };
inline Role peer_of(Role r) { return r == Role::A ? Role::B : Role::A; }
const char* role_name(Role r);

enum class MsgType : std::uint8_t {
  ShareOpen = 1,
  TripleShare = 2,
  Ciphertext = 3,
  PublicKey = 4,
  Control = 5,
  MetricsExchange = 6,
};

enum class Phase : std::uint8_t { Offline = 0, Online = 1 };
enum class Step : std::uint8_t { Other = 0, S1 = 1, S2 = 2, S3 = 3 };
const char* phase_name(Phase p);
const char* step_name(Step s);

inline constexpr std::size_t kFrameHeaderBytes = 7;
inline constexpr std::size_t kDefaultMaxFrameBytes = std::size_t{256} << 20;

struct Frame {
  MsgType type = MsgType::Control;
  Phase phase = Phase::Online;
  Step step = Step::Other;
  std::vector<std::uint8_t> payload;
};

std::array<std::uint8_t, kFrameHeaderBytes> encode_frame_header(const Frame& f);
// Validates the tag bytes and the length limit; returns the payload length.
std::size_t decode_frame_header(const std::array<std::uint8_t, kFrameHeaderBytes>& h, Frame& f,
                                std::size_t max_len);

struct MetricsCell {
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t rounds = 0;
  // Triple material delivered by the dealer (offline phase only).
  std::uint64_t dealer_bytes = 0;
  double wall_seconds = 0;

  MetricsCell& operator+=(const MetricsCell& o);
};

struct RunMetrics {
  std::array<std::array<MetricsCell, 4>, 2> cells{};

  MetricsCell& at(Phase p, Step s) { return cells[static_cast<int>(p)][static_cast<int>(s)]; }
  const MetricsCell& at(Phase p, Step s) const { return cells[static_cast<int>(p)][static_cast<int>(s)]; }
  MetricsCell phase_total(Phase p) const;
  MetricsCell step_total(Step s) const;
  MetricsCell total() const;
};

struct TranscriptEntry {
  bool outgoing = false;
  Frame frame;
};

// Thread-safe counters behind a channel.
class MetricsRecorder {
 public:
  void add_sent(Phase p, Step s, std::uint64_t n) { cell(p, s).sent += n; }
  void add_received(Phase p, Step s, std::uint64_t n) { cell(p, s).received += n; }
  void add_round(Phase p, Step s) { cell(p, s).rounds += 1; }
  void add_dealer_bytes(Step s, std::uint64_t n) { cell(Phase::Offline, s).dealer += n; }
  void add_wall(Phase p, Step s, std::chrono::nanoseconds d) { cell(p, s).nanos += d.count(); }
  RunMetrics snapshot() const;

 private:
  struct Cell {
    std::atomic<std::uint64_t> sent{0}, received{0}, rounds{0}, dealer{0};
    std::atomic<std::int64_t> nanos{0};
  };
  Cell& cell(Phase p, Step s) { return cells_[static_cast<int>(p)][static_cast<int>(s)]; }
  std::array<std::array<Cell, 4>, 2> cells_;
};

class Channel {
 public:
  explicit Channel(Role role) : role_(role) {}
  virtual ~Channel() = default;
  Channel(const Channel&) = delete;
  Channel& operator=(const Channel&) = delete;

  Role role() const { return role_; }

  // Raw frame transport with byte accounting under the frame's own tags.
  void send(const Frame& f);
  Frame recv();

  // Protocol-level messaging under the current tags. Each call is one round.
  void set_tags(Phase p, Step s) {
    phase_ = p;
    step_ = s;
  }
  Phase phase() const { return phase_; }
  Step step() const { return step_; }
  void send_msg(MsgType t, std::vector<std::uint8_t> payload);
  std::vector<std::uint8_t> recv_msg(MsgType expected);
  // Both parties send, then both receive; counted as a single round.
  std::vector<std::uint8_t> exchange(MsgType t, std::vector<std::uint8_t> payload);

  RunMetrics metrics_snapshot() const { return metrics_.snapshot(); }
  MetricsRecorder& metrics() { return metrics_; }

  void set_max_frame_bytes(std::size_t n) { max_frame_ = n; }
  void record_transcript(bool on);
  std::vector<TranscriptEntry> transcript() const;

  virtual void close() = 0;

 protected:
  virtual void write_wire(std::vector<std::uint8_t> wire) = 0;
  virtual void read_wire(std::uint8_t* dst, std::size_t n) = 0;
  // Whether a large write can block until the peer reads.
  virtual bool writes_may_block() const = 0;

 private:
  void note(bool outgoing, const Frame& f);

  Role role_;
  Phase phase_ = Phase::Online;
  Step step_ = Step::Other;
  std::size_t max_frame_ = kDefaultMaxFrameBytes;
  MetricsRecorder metrics_;
  mutable std::mutex transcript_mu_;
  bool transcript_on_ = false;
  std::vector<TranscriptEntry> transcript_;
};

// Sets the channel tags for a scope and charges its wall time to that cell.
class StepScope {
 public:
  StepScope(Channel& ch, Phase p, Step s);
  ~StepScope();
  StepScope(const StepScope&) = delete;
  StepScope& operator=(const StepScope&) = delete;

 private:
  Channel& ch_;
  Phase prev_phase_, phase_;
  Step prev_step_, step_;
  std::chrono::steady_clock::time_point start_;
};

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> loopback_pair();

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  static Endpoint parse(const std::string& s);
};

// Role A listens on the endpoint and role B dials it, retrying until the timeout.
std::unique_ptr<Channel> connect(Role role, const Endpoint& ep,
                                 std::chrono::milliseconds timeout = std::chrono::seconds(30));

// Bound listening socket; port 0 asks the OS for a free port.
class TcpListener {
 public:
  explicit TcpListener(const Endpoint& ep);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  std::unique_ptr<Channel> accept(Role role, std::chrono::milliseconds timeout);

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

std::unique_ptr<Channel> tcp_dial(Role role, const Endpoint& ep, std::chrono::milliseconds timeout);

}  // namespace spkm
