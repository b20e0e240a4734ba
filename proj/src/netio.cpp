#include "gridstorm/netio.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

namespace gridstorm::netio {

namespace {

// explicit little-endian field access, independent of host byte order
template <typename T>
void put_le(uint8_t* p, T v) {
  for (size_t i = 0; i < sizeof(T); ++i) p[i] = static_cast<uint8_t>(v >> (8 * i));
}

template <typename T>
T get_le(const uint8_t* p) {
  T v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
  return v;
}

void put_f64(uint8_t* p, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_le(p, bits);
}

double get_f64(const uint8_t* p) {
  uint64_t bits = get_le<uint64_t>(p);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void check_header(std::span<const uint8_t> d, size_t expect_size, uint32_t expect_magic,
                  const char* what) {
  if (d.size() != expect_size)
    throw CodecError(std::string(what) + ": length " + std::to_string(d.size()) + ", expected " +
                     std::to_string(expect_size));
  if (get_le<uint32_t>(d.data()) != expect_magic)
    throw CodecError(std::string(what) + ": bad magic");
  if (d[4] != kProtocolVersion)
    throw CodecError(std::string(what) + ": unsupported version " + std::to_string(d[4]));
}

} // namespace

// Telemetry layout (64 bytes): magic u32 | version u8 | breaker_state u8 |
// fault_flag u8 | reserved u8 | seq u32 | sim_time_us u64 | bus_id u16 |
// island_id u16 | frequency f64 | v_mag f64 | v_ang f64 | p_mw f64 | q_mvar f64.
// The two flag bytes ride in the header pad so the frame stays at 64 bytes
// with frequency at offset 24.
std::array<uint8_t, kTelemetryFrameSize> encode_telemetry(const TelemetryFrame& f) {
  std::array<uint8_t, kTelemetryFrameSize> d{};
  put_le<uint32_t>(&d[0], kTelemetryMagic);
  d[4] = kProtocolVersion;
  d[5] = f.breaker_state;
  d[6] = f.fault_flag;
  d[7] = 0;
  put_le<uint32_t>(&d[8], f.seq);
  put_le<uint64_t>(&d[12], f.sim_time_us);
  put_le<uint16_t>(&d[20], f.bus_id);
  put_le<uint16_t>(&d[22], f.island_id);
  put_f64(&d[24], f.frequency_hz);
  put_f64(&d[32], f.v_mag_pu);
  put_f64(&d[40], f.v_ang_rad);
  put_f64(&d[48], f.p_mw);
  put_f64(&d[56], f.q_mvar);
  return d;
}

TelemetryFrame decode_telemetry(std::span<const uint8_t> d) {
  check_header(d, kTelemetryFrameSize, kTelemetryMagic, "telemetry");
  TelemetryFrame f;
  f.breaker_state = d[5];
  f.fault_flag = d[6];
  f.seq = get_le<uint32_t>(&d[8]);
  f.sim_time_us = get_le<uint64_t>(&d[12]);
  f.bus_id = get_le<uint16_t>(&d[20]);
  f.island_id = get_le<uint16_t>(&d[22]);
  f.frequency_hz = get_f64(&d[24]);
  f.v_mag_pu = get_f64(&d[32]);
  f.v_ang_rad = get_f64(&d[40]);
  f.p_mw = get_f64(&d[48]);
  f.q_mvar = get_f64(&d[56]);
  return f;
}

// Command layout (24 bytes): magic u32 | version u8 | pad[3] | seq u32 |
// breaker_id u16 | action u8 | pad | execute_at_us u64.
std::array<uint8_t, kCommandFrameSize> encode_command(const CommandFrame& c) {
  std::array<uint8_t, kCommandFrameSize> d{};
  put_le<uint32_t>(&d[0], kCommandMagic);
  d[4] = kProtocolVersion;
  put_le<uint32_t>(&d[8], c.seq);
  put_le<uint16_t>(&d[12], c.breaker_id);
  d[14] = c.action;
  put_le<uint64_t>(&d[16], c.execute_at_us);
  return d;
}

CommandFrame decode_command(std::span<const uint8_t> d) {
  check_header(d, kCommandFrameSize, kCommandMagic, "command");
  CommandFrame c;
  c.seq = get_le<uint32_t>(&d[8]);
  c.breaker_id = get_le<uint16_t>(&d[12]);
  c.action = d[14];
  if (c.action > 1) throw CodecError("command: action " + std::to_string(c.action));
  c.execute_at_us = get_le<uint64_t>(&d[16]);
  return c;
}

std::array<uint8_t, kAckFrameSize> encode_ack(const AckFrame& a) {
  std::array<uint8_t, kAckFrameSize> d{};
  put_le<uint32_t>(&d[0], kAckMagic);
  d[4] = kProtocolVersion;
  put_le<uint32_t>(&d[8], a.seq);
  return d;
}

AckFrame decode_ack(std::span<const uint8_t> d) {
  check_header(d, kAckFrameSize, kAckMagic, "ack");
  return AckFrame{get_le<uint32_t>(&d[8])};
}

// ---------------------------------------------------------------------------
// Sockets

Endpoint parse_endpoint(const std::string& hostport) {
  auto colon = hostport.rfind(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("endpoint '" + hostport + "' is not host:port");
  Endpoint ep;
  ep.host = hostport.substr(0, colon);
  ep.port = static_cast<uint16_t>(std::stoi(hostport.substr(colon + 1)));
  return ep;
}

namespace {

sockaddr_in to_sockaddr(const Endpoint& ep) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(ep.port);
  if (inet_pton(AF_INET, ep.host.c_str(), &sa.sin_addr) != 1)
    throw std::runtime_error("bad IPv4 address '" + ep.host + "'");
  return sa;
}

} // namespace

UdpSocket::UdpSocket() {
  fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (fd_ < 0) throw std::runtime_error("socket(): " + std::string(strerror(errno)));
}

UdpSocket::~UdpSocket() {
  if (fd_ >= 0) ::close(fd_);
}

void UdpSocket::bind(const Endpoint& ep) {
  sockaddr_in sa = to_sockaddr(ep);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0)
    throw std::runtime_error("bind " + ep.host + ":" + std::to_string(ep.port) + ": " +
                             strerror(errno));
}

uint16_t UdpSocket::local_port() const {
  sockaddr_in sa{};
  socklen_t len = sizeof sa;
  if (getsockname(fd_, reinterpret_cast<sockaddr*>(&sa), &len) != 0)
    throw std::runtime_error("getsockname(): " + std::string(strerror(errno)));
  return ntohs(sa.sin_port);
}

void UdpSocket::send_to(const Endpoint& ep, std::span<const uint8_t> data) {
  sockaddr_in sa = to_sockaddr(ep);
  // fire-and-forget: send errors (e.g. no peer) are deliberately ignored
  ::sendto(fd_, data.data(), data.size(), 0, reinterpret_cast<sockaddr*>(&sa), sizeof sa);
}

std::vector<uint8_t> UdpSocket::recv(std::chrono::milliseconds timeout) {
  timeval tv{};
  tv.tv_sec = timeout.count() / 1000;
  tv.tv_usec = (timeout.count() % 1000) * 1000;
  setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  std::vector<uint8_t> buf(2048);
  ssize_t n = ::recvfrom(fd_, buf.data(), buf.size(), 0, nullptr, nullptr);
  if (n < 0) return {};
  buf.resize(static_cast<size_t>(n));
  return buf;
}

// ---------------------------------------------------------------------------
// SimulatorLink

SimulatorLink::SimulatorLink(Config cfg) : cfg_(std::move(cfg)) {
  rx_.bind(cfg_.command_listen);
  receiver_ = std::thread([this] { receiver_loop(); });
}

SimulatorLink::~SimulatorLink() {
  stop_ = true;
  commands_.close();
  if (receiver_.joinable()) receiver_.join();
}

uint16_t SimulatorLink::command_port() const {
  return rx_.local_port();
}

void SimulatorLink::receiver_loop() {
  while (!stop_) {
    auto datagram = rx_.recv(std::chrono::milliseconds(50));
    if (datagram.empty()) continue;
    try {
      if (datagram.size() == kCommandFrameSize) {
        commands_.push_wait(decode_command(datagram));
        stats_.commands_received.fetch_add(1);
      } else if (datagram.size() == kAckFrameSize) {
        AckFrame ack = decode_ack(datagram);
        {
          std::lock_guard lk(ack_mu_);
          uint32_t prev = acked_seq_.load();
          if (ack.seq > prev) acked_seq_.store(ack.seq);
        }
        ack_cv_.notify_all();
        stats_.acks_received.fetch_add(1);
      } else {
        throw CodecError("unknown datagram size " + std::to_string(datagram.size()));
      }
    } catch (const CodecError&) {
      stats_.malformed_dropped.fetch_add(1);
    }
  }
}

void SimulatorLink::publish(const TelemetryFrame& frame) {
  tx_.send_to(cfg_.telemetry_dest, encode_telemetry(frame));
  stats_.frames_sent.fetch_add(1);
  if (cfg_.lockstep_sync) {
    std::unique_lock lk(ack_mu_);
    bool acked = ack_cv_.wait_for(lk, cfg_.ack_timeout,
                                  [&] { return acked_seq_.load() >= frame.seq; });
    if (!acked) stats_.ack_timeouts.fetch_add(1);
  }
}

std::optional<CommandFrame> SimulatorLink::poll_command() {
  return commands_.try_pop();
}

} // namespace gridstorm::netio
