#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <cstring>
#include <random>
#include <thread>

#include "gridstorm/netio.hpp"

using namespace gridstorm::netio;
using namespace std::chrono_literals;

TEST_CASE("zero telemetry frame has the forced layout") {
  auto d = encode_telemetry(TelemetryFrame{});
  const uint8_t header[8] = {0x31, 0x54, 0x47, 0x4D, 0x01, 0x00, 0x00, 0x00};
  CHECK(std::memcmp(d.data(), header, 8) == 0);
  for (size_t i = 8; i < d.size(); ++i) CHECK(d[i] == 0);
}

TEST_CASE("frequency field sits at bytes 24..32, little-endian IEEE-754") {
  TelemetryFrame f;
  f.frequency_hz = 60.0;
  auto d = encode_telemetry(f);
  uint64_t bits;
  double v = 60.0;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) CHECK(d[24 + i] == static_cast<uint8_t>(bits >> (8 * i)));
}

TEST_CASE("codec round-trips randomized frames") {
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> real(-1e6, 1e6);
  for (int k = 0; k < 10000; ++k) {
    TelemetryFrame f;
    f.seq = static_cast<uint32_t>(rng());
    f.sim_time_us = rng();
    f.bus_id = static_cast<uint16_t>(rng());
    f.island_id = static_cast<uint16_t>(rng());
    f.frequency_hz = real(rng);
    f.v_mag_pu = real(rng);
    f.v_ang_rad = real(rng);
    f.p_mw = real(rng);
    f.q_mvar = real(rng);
    f.breaker_state = rng() & 1;
    f.fault_flag = rng() & 1;
    CHECK(decode_telemetry(encode_telemetry(f)) == f);

    CommandFrame c;
    c.seq = static_cast<uint32_t>(rng());
    c.breaker_id = static_cast<uint16_t>(rng());
    c.action = rng() & 1;
    c.execute_at_us = rng();
    CHECK(decode_command(encode_command(c)) == c);

    AckFrame a{static_cast<uint32_t>(rng())};
    CHECK(decode_ack(encode_ack(a)).seq == a.seq);
  }
}

TEST_CASE("well-formed open command decodes directly") {
  CommandFrame c;
  c.seq = 7;
  c.breaker_id = 1;
  c.action = 0;
  auto got = decode_command(encode_command(c));
  CHECK(got.breaker_id == 1);
  CHECK(got.action == 0);
}

TEST_CASE("malformed datagrams are rejected, never crash") {
  std::vector<uint8_t> ten(10, 0);
  CHECK_THROWS_AS(decode_command(ten), CodecError);

  // telemetry magic arriving on the command decoder
  auto t = encode_telemetry(TelemetryFrame{});
  std::vector<uint8_t> wrong(t.begin(), t.begin() + kCommandFrameSize);
  CHECK_THROWS_AS(decode_command(wrong), CodecError);

  // bad version
  auto c = encode_command(CommandFrame{});
  c[4] = 9;
  CHECK_THROWS_AS(decode_command(c), CodecError);

  // bad action
  auto c2 = encode_command(CommandFrame{});
  c2[14] = 3;
  CHECK_THROWS_AS(decode_command(c2), CodecError);

  // pure fuzz: arbitrary bytes at assorted lengths
  std::mt19937_64 rng(99);
  for (int k = 0; k < 10000; ++k) {
    std::vector<uint8_t> junk(rng() % 128);
    for (auto& b : junk) b = static_cast<uint8_t>(rng());
    try {
      (void)decode_command(junk);
      (void)decode_telemetry(junk);
      (void)decode_ack(junk);
    } catch (const CodecError&) {
      // expected for nearly everything
    }
  }
}

TEST_CASE("endpoint parsing") {
  auto ep = parse_endpoint("127.0.0.1:7401");
  CHECK(ep.host == "127.0.0.1");
  CHECK(ep.port == 7401);
  CHECK_THROWS(parse_endpoint("no-port-here"));
  CHECK_THROWS(parse_endpoint("host:notanumber"));
}

TEST_CASE("spsc queue semantics") {
  SpscQueue<int> q(3);
  q.push_drop_oldest(1);
  q.push_drop_oldest(2);
  q.push_drop_oldest(3);
  q.push_drop_oldest(4); // evicts 1
  CHECK(q.dropped() == 1);
  CHECK(q.try_pop() == 2);
  CHECK(q.try_pop() == 3);
  CHECK(q.try_pop() == 4);
  CHECK(!q.try_pop().has_value());
  CHECK(!q.pop_wait_for(1ms).has_value());
}

TEST_CASE("publishing with no listener proceeds unaffected") {
  SimulatorLink::Config cfg;
  cfg.telemetry_dest = {"127.0.0.1", 1}; // nobody home
  cfg.command_listen = {"127.0.0.1", 0};
  SimulatorLink link(cfg);
  for (int i = 0; i < 100; ++i) {
    TelemetryFrame f;
    f.seq = static_cast<uint32_t>(i + 1);
    link.publish(f);
  }
  CHECK(link.stats().frames_sent == 100);
  CHECK(!link.poll_command().has_value());
}

TEST_CASE("loopback command reaches the simulator link") {
  SimulatorLink::Config cfg;
  cfg.telemetry_dest = {"127.0.0.1", 1};
  cfg.command_listen = {"127.0.0.1", 0};
  SimulatorLink link(cfg);
  REQUIRE(link.command_port() != 0);

  UdpSocket peer;
  CommandFrame c;
  c.seq = 42;
  c.breaker_id = 1;
  c.action = 0;
  auto wire = encode_command(c);
  peer.send_to({"127.0.0.1", link.command_port()}, wire);

  // malformed datagrams on the same port are counted and dropped
  std::vector<uint8_t> junk(11, 0xFF);
  peer.send_to({"127.0.0.1", link.command_port()}, junk);

  std::optional<CommandFrame> got;
  for (int tries = 0; tries < 200 && !got; ++tries) {
    got = link.poll_command();
    if (!got) std::this_thread::sleep_for(1ms);
  }
  REQUIRE(got.has_value());
  CHECK(*got == c);

  for (int tries = 0; tries < 200 && link.stats().malformed_dropped == 0; ++tries)
    std::this_thread::sleep_for(1ms);
  CHECK(link.stats().malformed_dropped == 1);
  CHECK(link.stats().commands_received == 1);
}
