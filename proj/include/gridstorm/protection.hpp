#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gridstorm/dynamics.hpp"
#include "gridstorm/model.hpp"

namespace gridstorm::protection {

/// IEEE 1547-style ride-through limits (OF1/UF1) plus microgrid voltage band.
struct ProtectionLimits {
  double of1_hz = 61.0;
  double uf1_hz = 58.5;
  double ov_pu = 1.05;
  double uv_pu = 0.95;
};

enum class ViolationKind { OverFreq, UnderFreq, OverVolt, UnderVolt };

const char* violation_kind_name(ViolationKind k);

struct Violation {
  ViolationKind kind;
  int bus = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  double extremum = 0.0; // Hz or p.u., most extreme sample in the interval
};

struct BusSample {
  int bus = 0;
  double t = 0.0;
  double f_hz = 0.0;
  double v_pu = 0.0;
};

/// Interval-building violation log. Monitoring only: the paper's attacks are
/// allowed to proceed, so nothing trips unless relaying is explicitly armed.
class ViolationLog {
public:
  explicit ViolationLog(ProtectionLimits limits = {}) : limits_(limits) {}

  void check_limits(const BusSample& sample);
  /// Closes any intervals still open at end-of-run time t.
  void finalize(double t);

  const std::vector<Violation>& violations() const { return closed_; }
  const ProtectionLimits& limits() const { return limits_; }

  /// Total time bus voltage spent below the UV limit, s.
  double undervoltage_duration(int bus) const;
  bool any_frequency_violation() const;

private:
  struct Key {
    ViolationKind kind;
    int bus;
    auto operator<=>(const Key&) const = default;
  };
  ProtectionLimits limits_;
  std::map<Key, Violation> open_;
  std::vector<Violation> closed_;

  void track(ViolationKind kind, int bus, double t, bool violated, double value, bool maximize);
};

/// A timed open/close actuation order (decoded from the command link or
/// produced by scripted scenarios).
struct BreakerCommand {
  uint32_t seq = 0;
  std::string breaker_id;
  bool close = false;       // false = open
  double execute_at = 0.0;  // s, 0 = immediate
  dynamics::EventOrigin origin = dynamics::EventOrigin::Remote;
};

/// Orders pending breaker actuations, quantizes them to step boundaries, and
/// drops same-state duplicates.
class BreakerScheduler {
public:
  explicit BreakerScheduler(const model::GridModel& model);

  /// Enqueues the command as a SimEvent at max(execute_at, now) rounded up to
  /// the next step boundary. Returns false for unknown breakers.
  bool schedule(const BreakerCommand& cmd, double now, double dt);

  /// Removes and returns all events due at or before t.
  std::vector<dynamics::SimEvent> collect_due(double t);

  const std::vector<dynamics::SimEvent>& history() const { return history_; }
  size_t pending() const { return queue_.size(); }

private:
  const model::GridModel& model_;
  std::vector<dynamics::SimEvent> queue_; // kept sorted by time, stable per breaker
  std::vector<dynamics::SimEvent> history_;
  std::map<std::string, bool> last_target_closed_;
};

} // namespace gridstorm::protection
