#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <deque>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace gridstorm::netio {

// Wire protocol, little-endian, fixed layouts. Deliberately unauthenticated:
// the insecure command surface is the vulnerability under study.
constexpr uint32_t kTelemetryMagic = 0x4D475431; // "1TGM" on the wire
constexpr uint32_t kCommandMagic = 0x4D474331;   // "1CGM"
constexpr uint32_t kAckMagic = 0x4D474B31;       // "1KGM"
constexpr uint8_t kProtocolVersion = 1;
constexpr size_t kTelemetryFrameSize = 64;
constexpr size_t kCommandFrameSize = 24;
constexpr size_t kAckFrameSize = 16;

struct TelemetryFrame {
  uint32_t seq = 0;
  uint64_t sim_time_us = 0;
  uint16_t bus_id = 0;
  uint16_t island_id = 0;
  double frequency_hz = 0.0;
  double v_mag_pu = 0.0;
  double v_ang_rad = 0.0;
  double p_mw = 0.0;
  double q_mvar = 0.0;
  uint8_t breaker_state = 0; // PCC breaker: 0 open, 1 closed
  uint8_t fault_flag = 0;

  bool operator==(const TelemetryFrame&) const = default;
};

struct CommandFrame {
  uint32_t seq = 0;
  uint16_t breaker_id = 0;
  uint8_t action = 0;         // 0 open, 1 close
  uint64_t execute_at_us = 0; // sim time; 0 = immediate

  bool operator==(const CommandFrame&) const = default;
};

struct AckFrame {
  uint32_t seq = 0; // telemetry seq being acknowledged
};

class CodecError : public std::runtime_error {
public:
  explicit CodecError(const std::string& msg) : std::runtime_error("malformed datagram: " + msg) {}
};

std::array<uint8_t, kTelemetryFrameSize> encode_telemetry(const TelemetryFrame& f);
TelemetryFrame decode_telemetry(std::span<const uint8_t> datagram);
std::array<uint8_t, kCommandFrameSize> encode_command(const CommandFrame& c);
CommandFrame decode_command(std::span<const uint8_t> datagram);
std::array<uint8_t, kAckFrameSize> encode_ack(const AckFrame& a);
AckFrame decode_ack(std::span<const uint8_t> datagram);

/// Bounded single-producer/single-consumer queue. push_drop_oldest models the
/// lossy telemetry path; push_wait gives commands backpressure instead of loss.
template <typename T>
class SpscQueue {
public:
  explicit SpscQueue(size_t capacity) : capacity_(capacity) {}

  void push_drop_oldest(T item) {
    std::lock_guard lk(mu_);
    if (q_.size() >= capacity_) {
      q_.pop_front();
      ++dropped_;
    }
    q_.push_back(std::move(item));
    cv_.notify_one();
  }

  void push_wait(T item) {
    std::unique_lock lk(mu_);
    cv_space_.wait(lk, [&] { return q_.size() < capacity_ || closed_; });
    if (closed_) return;
    q_.push_back(std::move(item));
    cv_.notify_one();
  }

  std::optional<T> try_pop() {
    std::lock_guard lk(mu_);
    if (q_.empty()) return std::nullopt;
    T out = std::move(q_.front());
    q_.pop_front();
    cv_space_.notify_one();
    return out;
  }

  std::optional<T> pop_wait_for(std::chrono::milliseconds timeout) {
    std::unique_lock lk(mu_);
    if (!cv_.wait_for(lk, timeout, [&] { return !q_.empty() || closed_; })) return std::nullopt;
    if (q_.empty()) return std::nullopt;
    T out = std::move(q_.front());
    q_.pop_front();
    cv_space_.notify_one();
    return out;
  }

  void close() {
    std::lock_guard lk(mu_);
    closed_ = true;
    cv_.notify_all();
    cv_space_.notify_all();
  }

  uint64_t dropped() const {
    std::lock_guard lk(mu_);
    return dropped_;
  }

private:
  mutable std::mutex mu_;
  std::condition_variable cv_, cv_space_;
  std::deque<T> q_;
  size_t capacity_;
  uint64_t dropped_ = 0;
  bool closed_ = false;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  uint16_t port = 0;
};

Endpoint parse_endpoint(const std::string& hostport); // "host:port"

/// Thin RAII wrapper over a UDP socket.
class UdpSocket {
public:
  UdpSocket();
  ~UdpSocket();
  UdpSocket(const UdpSocket&) = delete;
  UdpSocket& operator=(const UdpSocket&) = delete;

  void bind(const Endpoint& ep); // throws on failure
  uint16_t local_port() const;
  void send_to(const Endpoint& ep, std::span<const uint8_t> data);
  /// Receives one datagram; empty if the timeout elapsed.
  std::vector<uint8_t> recv(std::chrono::milliseconds timeout);

private:
  int fd_ = -1;
};

struct LinkStats {
  std::atomic<uint64_t> frames_sent{0};
  std::atomic<uint64_t> commands_received{0};
  std::atomic<uint64_t> malformed_dropped{0};
  std::atomic<uint64_t> acks_received{0};
  std::atomic<uint64_t> ack_timeouts{0};
};

/// Simulator-side network endpoint: publishes telemetry to the peer and
/// listens for breaker commands. The receiver runs on its own thread; the
/// simulation loop touches only the two SPSC queues (and, in lockstep-sync
/// mode, the ack watermark).
class SimulatorLink {
public:
  struct Config {
    Endpoint telemetry_dest;      // attacker's telemetry port
    Endpoint command_listen;      // our command/ack listen address (port 0 = ephemeral)
    bool lockstep_sync = false;   // wait for frame acks (deterministic CI runs)
    std::chrono::milliseconds ack_timeout{250};
  };

  explicit SimulatorLink(Config cfg);
  ~SimulatorLink();

  uint16_t command_port() const;
  void set_telemetry_dest(const Endpoint& ep) { cfg_.telemetry_dest = ep; }

  /// Sends one frame; in lockstep-sync mode blocks until the peer acks it
  /// (or the timeout elapses, after which the run proceeds unsynced).
  void publish(const TelemetryFrame& frame);

  /// Commands decoded so far, drained by the simulation loop once per step.
  std::optional<CommandFrame> poll_command();

  const LinkStats& stats() const { return stats_; }

private:
  void receiver_loop();

  Config cfg_;
  UdpSocket tx_, rx_;
  SpscQueue<CommandFrame> commands_{1024};
  std::atomic<uint32_t> acked_seq_{0};
  std::mutex ack_mu_;
  std::condition_variable ack_cv_;
  LinkStats stats_;
  std::atomic<bool> stop_{false};
  std::thread receiver_;
};

} // namespace gridstorm::netio
