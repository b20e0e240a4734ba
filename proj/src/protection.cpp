#include "gridstorm/protection.hpp"

#include <algorithm>
#include <cmath>

namespace gridstorm::protection {

const char* violation_kind_name(ViolationKind k) {
  switch (k) {
    case ViolationKind::OverFreq: return "OverFreq";
    case ViolationKind::UnderFreq: return "UnderFreq";
    case ViolationKind::OverVolt: return "OverVolt";
    default: return "UnderVolt";
  }
}

void ViolationLog::track(ViolationKind kind, int bus, double t, bool violated, double value,
                         bool maximize) {
  Key key{kind, bus};
  auto it = open_.find(key);
  if (violated) {
    if (it == open_.end()) {
      open_[key] = Violation{kind, bus, t, t, value};
    } else {
      it->second.t_end = t;
      it->second.extremum =
          maximize ? std::max(it->second.extremum, value) : std::min(it->second.extremum, value);
    }
  } else if (it != open_.end()) {
    closed_.push_back(it->second);
    open_.erase(it);
  }
}

void ViolationLog::check_limits(const BusSample& s) {
  if (std::isnan(s.f_hz) || std::isnan(s.v_pu)) return; // de-energized bus: not monitored
  track(ViolationKind::OverFreq, s.bus, s.t, s.f_hz > limits_.of1_hz, s.f_hz, true);
  track(ViolationKind::UnderFreq, s.bus, s.t, s.f_hz < limits_.uf1_hz, s.f_hz, false);
  track(ViolationKind::OverVolt, s.bus, s.t, s.v_pu > limits_.ov_pu, s.v_pu, true);
  track(ViolationKind::UnderVolt, s.bus, s.t, s.v_pu < limits_.uv_pu, s.v_pu, false);
}

void ViolationLog::finalize(double t) {
  for (auto& [key, v] : open_) {
    v.t_end = t;
    closed_.push_back(v);
  }
  open_.clear();
  std::sort(closed_.begin(), closed_.end(),
            [](const Violation& a, const Violation& b) { return a.t_start < b.t_start; });
}

double ViolationLog::undervoltage_duration(int bus) const {
  double total = 0.0;
  for (const auto& v : closed_)
    if (v.kind == ViolationKind::UnderVolt && v.bus == bus) total += v.t_end - v.t_start;
  return total;
}

bool ViolationLog::any_frequency_violation() const {
  return std::any_of(closed_.begin(), closed_.end(), [](const Violation& v) {
    return v.kind == ViolationKind::OverFreq || v.kind == ViolationKind::UnderFreq;
  });
}

BreakerScheduler::BreakerScheduler(const model::GridModel& model) : model_(model) {
  for (const auto& b : model.breakers)
    last_target_closed_[b.id] = b.state == model::BreakerState::Closed;
}

bool BreakerScheduler::schedule(const BreakerCommand& cmd, double now, double dt) {
  if (!model_.find_breaker(cmd.breaker_id)) return false;

  auto it = last_target_closed_.find(cmd.breaker_id);
  if (it->second == cmd.close) return true; // same-state duplicate: idempotent no-op
  it->second = cmd.close;

  double at = std::max(cmd.execute_at, now);
  // quantize to the next step boundary (events fire only between steps)
  double steps = std::ceil(at / dt - 1e-9);
  at = steps * dt;
  if (at < now) at = now;

  dynamics::SimEvent ev;
  ev.at = at;
  ev.kind = cmd.close ? dynamics::EventKind::BreakerClose : dynamics::EventKind::BreakerOpen;
  ev.target = cmd.breaker_id;
  ev.origin = cmd.origin;
  // stable insert keeps same-breaker commands order-preserving
  auto pos = std::upper_bound(queue_.begin(), queue_.end(), ev,
                              [](const dynamics::SimEvent& a, const dynamics::SimEvent& b) {
                                return a.at < b.at;
                              });
  queue_.insert(pos, ev);
  return true;
}

std::vector<dynamics::SimEvent> BreakerScheduler::collect_due(double t) {
  std::vector<dynamics::SimEvent> due;
  auto it = queue_.begin();
  while (it != queue_.end() && it->at <= t + 1e-9) {
    due.push_back(*it);
    history_.push_back(*it);
    it = queue_.erase(it);
  }
  return due;
}

} // namespace gridstorm::protection
