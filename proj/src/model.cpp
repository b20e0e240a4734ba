#include "gridstorm/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace gridstorm::model {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream iss(s);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

double parse_double(const std::string& tok, int line) {
  double v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    throw ParseError("bad number '" + tok + "'", line);
  return v;
}

int parse_int(const std::string& tok, int line) {
  int v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    throw ParseError("bad integer '" + tok + "'", line);
  return v;
}

std::string fmt_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

BusKind parse_kind(const std::string& tok, int line) {
  if (tok == "Slack") return BusKind::Slack;
  if (tok == "PV") return BusKind::PV;
  if (tok == "PQ") return BusKind::PQ;
  throw ParseError("unknown bus kind '" + tok + "'", line);
}

const char* kind_name(BusKind k) {
  switch (k) {
    case BusKind::Slack: return "Slack";
    case BusKind::PV: return "PV";
    default: return "PQ";
  }
}

} // namespace

const Breaker* GridModel::find_breaker(const std::string& id) const {
  auto it = breaker_index.find(id);
  return it == breaker_index.end() ? nullptr : &breakers[it->second];
}

const Breaker* GridModel::find_breaker_wire(uint16_t wire_id) const {
  for (const auto& b : breakers)
    if (b.wire_id == wire_id) return &b;
  return nullptr;
}

void GridModel::validate() {
  bus_index.clear();
  branch_index.clear();
  breaker_index.clear();

  if (f_nominal_hz <= 0 || s_base_mva <= 0)
    throw ValidationError("f_nominal and s_base must be positive");

  for (size_t i = 0; i < buses.size(); ++i) {
    const auto& b = buses[i];
    if (bus_index.count(b.id))
      throw ValidationError("duplicate bus id " + std::to_string(b.id));
    if (b.base_kv <= 0)
      throw ValidationError("bus " + std::to_string(b.id) + ": base_kv must be positive");
    bus_index[b.id] = static_cast<int>(i);
  }

  int n_slack = 0;
  for (const auto& b : buses)
    if (b.kind == BusKind::Slack) ++n_slack;
  if (n_slack != 1)
    throw ValidationError("expected exactly one slack bus, found " + std::to_string(n_slack));

  for (size_t i = 0; i < branches.size(); ++i) {
    const auto& br = branches[i];
    if (branch_index.count(br.id))
      throw ValidationError("duplicate branch id " + br.id);
    if (!bus_index.count(br.from_bus))
      throw ValidationError("branch " + br.id + " references unknown bus " +
                            std::to_string(br.from_bus));
    if (!bus_index.count(br.to_bus))
      throw ValidationError("branch " + br.id + " references unknown bus " +
                            std::to_string(br.to_bus));
    if (br.from_bus == br.to_bus)
      throw ValidationError("branch " + br.id + " is a self-loop");
    if (br.x == 0.0)
      throw ValidationError("branch " + br.id + " has zero reactance");
    if (br.tap <= 0.0)
      throw ValidationError("branch " + br.id + " has non-positive tap");
    branch_index[br.id] = static_cast<int>(i);
  }

  for (size_t i = 0; i < breakers.size(); ++i) {
    const auto& bk = breakers[i];
    if (breaker_index.count(bk.id))
      throw ValidationError("duplicate breaker id " + bk.id);
    if (bk.controlled_branches.empty())
      throw ValidationError("breaker " + bk.id + " controls no branches");
    for (const auto& br_id : bk.controlled_branches)
      if (!branch_index.count(br_id))
        throw ValidationError("breaker " + bk.id + " references unknown branch " + br_id);
    breaker_index[bk.id] = static_cast<int>(i);
  }
  for (const auto& br : branches)
    if (br.breaker_id && !breaker_index.count(*br.breaker_id))
      throw ValidationError("branch " + br.id + " references unknown breaker " + *br.breaker_id);

  for (const auto& m : machines) {
    if (!bus_index.count(m.bus))
      throw ValidationError("machine " + m.id + " at unknown bus " + std::to_string(m.bus));
    if (m.h <= 0) throw ValidationError("machine " + m.id + ": h must be positive");
    if (m.xdp <= 0) throw ValidationError("machine " + m.id + ": xdp must be positive");
    if (m.governor_droop <= 0 || m.governor_droop > 0.1)
      throw ValidationError("machine " + m.id + ": governor_droop out of (0, 0.1]");
    if (m.rating_mva < m.p_dispatch_mw)
      throw ValidationError("machine " + m.id + ": rating below dispatch");
  }
  for (const auto& inv : inverters) {
    if (!bus_index.count(inv.bus))
      throw ValidationError("inverter " + inv.id + " at unknown bus " + std::to_string(inv.bus));
    if (inv.rating_mva < inv.p_set_mw)
      throw ValidationError("inverter " + inv.id + ": rating below p_set");
    if (inv.mp <= 0) throw ValidationError("inverter " + inv.id + ": mp must be positive");
    if (inv.mq < 0) throw ValidationError("inverter " + inv.id + ": mq must be non-negative");
    if (inv.filter_tc <= 0)
      throw ValidationError("inverter " + inv.id + ": filter_tc must be positive");
  }
  for (const auto& f : faults) {
    if (!bus_index.count(f.bus))
      throw ValidationError("fault " + f.id + " at unknown bus " + std::to_string(f.bus));
    if (f.t_off <= f.t_on)
      throw ValidationError("fault " + f.id + ": t_off must exceed t_on");
    if (std::abs(f.y_fault) <= 0)
      throw ValidationError("fault " + f.id + ": zero fault admittance");
  }
}

BreakerStates initial_breaker_states(const GridModel& model) {
  BreakerStates st;
  for (const auto& b : model.breakers) st[b.id] = b.state;
  return st;
}

// ---------------------------------------------------------------------------
// Case document parsing

namespace {

struct Section {
  std::string name;
  // data rows (tokenized) for table sections, key=value pairs otherwise
  std::vector<std::pair<int, std::vector<std::string>>> rows;
  std::vector<std::pair<std::string, std::string>> kv;
};

std::vector<Section> tokenize_document(const std::string& doc) {
  std::vector<Section> sections;
  std::istringstream in(doc);
  std::string raw;
  int lineno = 0;
  Section* cur = nullptr;
  while (std::getline(in, raw)) {
    ++lineno;
    auto hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    auto line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated section header", lineno);
      sections.push_back({trim(line.substr(1, line.size() - 2)), {}, {}});
      cur = &sections.back();
      continue;
    }
    if (!cur) throw ParseError("data before first section header", lineno);
    auto eq = line.find('=');
    if (eq != std::string::npos) {
      cur->kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } else {
      cur->rows.emplace_back(lineno, split_ws(line));
    }
  }
  return sections;
}

void require_cols(const std::vector<std::string>& row, size_t n, const char* what, int line) {
  if (row.size() != n)
    throw ParseError(std::string(what) + ": expected " + std::to_string(n) + " columns, got " +
                         std::to_string(row.size()),
                     line);
}

void apply_overlay(GridModel& m, SystemMix mix) {
  const auto& sc = m.scenario;
  double pv_mw = mix == SystemMix::I ? sc.sys1_pv_mw : sc.sys2_pv_mw;
  double sync_mw = mix == SystemMix::I ? sc.sys1_sync_mw : sc.sys2_sync_mw;

  auto it = std::find_if(m.buses.begin(), m.buses.end(),
                         [&](const Bus& b) { return b.id == sc.mg_bus; });
  if (it == m.buses.end())
    throw ValidationError("scenario mg_bus " + std::to_string(sc.mg_bus) + " not in case");
  it->load_p_mw *= sc.load_scale;
  it->load_q_mvar *= sc.load_scale;
  it->kind = BusKind::PV;
  it->v_set = sc.mg_v_set;

  SynchronousMachine mg;
  mg.id = "MG-SYNC";
  mg.bus = sc.mg_bus;
  mg.p_dispatch_mw = sync_mw;
  mg.rating_mva = sc.machine_rating_factor * sync_mw;
  mg.h = sc.machine_h;
  mg.d = sc.machine_d;
  mg.xdp = sc.machine_xdp;
  mg.governor_droop = sc.machine_droop;
  mg.governor_tc = sc.machine_tc;
  m.machines.push_back(mg);

  GridFormingInverter pv;
  pv.id = "MG-PV";
  pv.bus = sc.mg_bus;
  pv.p_set_mw = pv_mw;
  pv.rating_mva = sc.inverter_rating_factor * pv_mw;
  pv.mp = sc.inverter_mp;
  pv.mq = sc.inverter_mq;
  pv.filter_tc = sc.inverter_filter_tc;
  pv.v_set = sc.mg_v_set;
  pv.x_out = sc.inverter_x_out;
  m.inverters.push_back(pv);

  m.applied_mix = mix;
}

} // namespace

GridModel load_case(const std::string& case_document, SystemMix mix) {
  GridModel m;
  bool overlay_already_applied = false;

  for (const auto& sec : tokenize_document(case_document)) {
    if (sec.name == "meta") {
      if (!sec.rows.empty())
        throw ParseError("meta section expects key = value lines", sec.rows.front().first);
      for (const auto& [k, v] : sec.kv) {
        if (k == "f_nominal_hz") m.f_nominal_hz = parse_double(v, -1);
        else if (k == "s_base_mva") m.s_base_mva = parse_double(v, -1);
        else if (k == "applied_mix") {
          if (v == "I") { m.applied_mix = SystemMix::I; overlay_already_applied = true; }
          else if (v == "II") { m.applied_mix = SystemMix::II; overlay_already_applied = true; }
          else if (v != "None") throw ParseError("bad applied_mix '" + v + "'");
        }
        else throw ParseError("unknown meta key '" + k + "'");
      }
    } else if (sec.name == "buses") {
      for (const auto& [ln, row] : sec.rows) {
        require_cols(row, 7, "bus row", ln);
        Bus b;
        b.id = parse_int(row[0], ln);
        b.kind = parse_kind(row[1], ln);
        b.base_kv = parse_double(row[2], ln);
        b.load_p_mw = parse_double(row[3], ln);
        b.load_q_mvar = parse_double(row[4], ln);
        b.shunt_b_pu = parse_double(row[5], ln);
        b.v_set = parse_double(row[6], ln);
        m.buses.push_back(b);
      }
    } else if (sec.name == "branches") {
      for (const auto& [ln, row] : sec.rows) {
        require_cols(row, 8, "branch row", ln);
        Branch br;
        br.id = row[0];
        br.from_bus = parse_int(row[1], ln);
        br.to_bus = parse_int(row[2], ln);
        br.r = parse_double(row[3], ln);
        br.x = parse_double(row[4], ln);
        br.b = parse_double(row[5], ln);
        // tap column: "-" marks a plain line; transformers carry a numeric
        // ratio even when it is 1.0
        if (row[6] == "-") {
          br.tap = 1.0;
        } else {
          br.tap = parse_double(row[6], ln);
          br.transformer = true;
        }
        if (row[7] != "-") br.breaker_id = row[7];
        m.branches.push_back(br);
      }
    } else if (sec.name == "breakers") {
      for (const auto& [ln, row] : sec.rows) {
        if (row.size() < 4) throw ParseError("breaker row: expected >= 4 columns", ln);
        Breaker bk;
        bk.id = row[0];
        bk.wire_id = static_cast<uint16_t>(parse_int(row[1], ln));
        if (row[2] == "closed") bk.state = BreakerState::Closed;
        else if (row[2] == "open") bk.state = BreakerState::Open;
        else throw ParseError("bad breaker state '" + row[2] + "'", ln);
        for (size_t i = 4; i < row.size(); ++i) bk.label += (bk.label.empty() ? "" : " ") + row[i];
        // column 3: comma-separated controlled branch list
        std::istringstream bs(row[3]);
        std::string tok;
        while (std::getline(bs, tok, ',')) bk.controlled_branches.push_back(tok);
        m.breakers.push_back(bk);
      }
    } else if (sec.name == "machines") {
      for (const auto& [ln, row] : sec.rows) {
        require_cols(row, 10, "machine row", ln);
        SynchronousMachine g;
        g.id = row[0];
        g.bus = parse_int(row[1], ln);
        g.rating_mva = parse_double(row[2], ln);
        g.h = parse_double(row[3], ln);
        g.d = parse_double(row[4], ln);
        g.xdp = parse_double(row[5], ln);
        g.governor_droop = parse_double(row[6], ln);
        g.governor_tc = parse_double(row[7], ln);
        g.p_dispatch_mw = parse_double(row[8], ln);
        g.emf = parse_double(row[9], ln);
        m.machines.push_back(g);
      }
    } else if (sec.name == "inverters") {
      for (const auto& [ln, row] : sec.rows) {
        require_cols(row, 11, "inverter row", ln);
        GridFormingInverter inv;
        inv.id = row[0];
        inv.bus = parse_int(row[1], ln);
        inv.rating_mva = parse_double(row[2], ln);
        inv.p_set_mw = parse_double(row[3], ln);
        inv.q_set_mvar = parse_double(row[4], ln);
        inv.mp = parse_double(row[5], ln);
        inv.mq = parse_double(row[6], ln);
        inv.filter_tc = parse_double(row[7], ln);
        inv.v_set = parse_double(row[8], ln);
        inv.x_out = parse_double(row[9], ln);
        (void)row[10]; // reserved column
        m.inverters.push_back(inv);
      }
    } else if (sec.name == "faults") {
      for (const auto& [ln, row] : sec.rows) {
        require_cols(row, 7, "fault row", ln);
        FaultSpec f;
        f.id = row[0];
        f.bus = parse_int(row[1], ln);
        double rf = parse_double(row[2], ln);
        double xf = parse_double(row[3], ln);
        if (rf == 0 && xf == 0) throw ParseError("fault impedance is zero", ln);
        f.y_fault = 1.0 / Complex(rf, xf);
        f.t_on = parse_double(row[4], ln);
        f.t_off = parse_double(row[5], ln);
        f.bulk_fed_only = parse_int(row[6], ln) != 0;
        m.faults.push_back(f);
      }
    } else if (sec.name == "scenario") {
      if (!sec.rows.empty())
        throw ParseError("scenario section expects key = value lines", sec.rows.front().first);
      auto& sc = m.scenario;
      for (const auto& [k, v] : sec.kv) {
        if (k == "mg_bus") sc.mg_bus = parse_int(v, -1);
        else if (k == "load_scale") sc.load_scale = parse_double(v, -1);
        else if (k == "sys1_pv_mw") sc.sys1_pv_mw = parse_double(v, -1);
        else if (k == "sys1_sync_mw") sc.sys1_sync_mw = parse_double(v, -1);
        else if (k == "sys2_pv_mw") sc.sys2_pv_mw = parse_double(v, -1);
        else if (k == "sys2_sync_mw") sc.sys2_sync_mw = parse_double(v, -1);
        else if (k == "machine_rating_factor") sc.machine_rating_factor = parse_double(v, -1);
        else if (k == "inverter_rating_factor") sc.inverter_rating_factor = parse_double(v, -1);
        else if (k == "machine_h") sc.machine_h = parse_double(v, -1);
        else if (k == "machine_d") sc.machine_d = parse_double(v, -1);
        else if (k == "machine_xdp") sc.machine_xdp = parse_double(v, -1);
        else if (k == "machine_droop") sc.machine_droop = parse_double(v, -1);
        else if (k == "machine_tc") sc.machine_tc = parse_double(v, -1);
        else if (k == "inverter_mp") sc.inverter_mp = parse_double(v, -1);
        else if (k == "inverter_mq") sc.inverter_mq = parse_double(v, -1);
        else if (k == "inverter_filter_tc") sc.inverter_filter_tc = parse_double(v, -1);
        else if (k == "inverter_x_out") sc.inverter_x_out = parse_double(v, -1);
        else if (k == "mg_v_set") sc.mg_v_set = parse_double(v, -1);
        else throw ParseError("unknown scenario key '" + k + "'");
      }
    } else {
      throw ParseError("unknown section [" + sec.name + "]");
    }
  }

  if (mix != SystemMix::None && !overlay_already_applied) apply_overlay(m, mix);
  m.validate();
  return m;
}

GridModel load_case_file(const std::string& path, SystemMix mix) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open case file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_case(ss.str(), mix);
}

std::string serialize(const GridModel& m) {
  std::ostringstream out;
  out << "[meta]\n";
  out << "f_nominal_hz = " << fmt_double(m.f_nominal_hz) << "\n";
  out << "s_base_mva = " << fmt_double(m.s_base_mva) << "\n";
  out << "applied_mix = "
      << (m.applied_mix == SystemMix::I ? "I" : m.applied_mix == SystemMix::II ? "II" : "None")
      << "\n\n";

  out << "[buses]\n";
  for (const auto& b : m.buses)
    out << b.id << " " << kind_name(b.kind) << " " << fmt_double(b.base_kv) << " "
        << fmt_double(b.load_p_mw) << " " << fmt_double(b.load_q_mvar) << " "
        << fmt_double(b.shunt_b_pu) << " " << fmt_double(b.v_set) << "\n";

  out << "\n[branches]\n";
  for (const auto& br : m.branches)
    out << br.id << " " << br.from_bus << " " << br.to_bus << " " << fmt_double(br.r) << " "
        << fmt_double(br.x) << " " << fmt_double(br.b) << " "
        << (br.transformer ? fmt_double(br.tap) : std::string("-")) << " "
        << (br.breaker_id ? *br.breaker_id : "-") << "\n";

  out << "\n[breakers]\n";
  for (const auto& bk : m.breakers) {
    out << bk.id << " " << bk.wire_id << " "
        << (bk.state == BreakerState::Closed ? "closed" : "open") << " ";
    for (size_t i = 0; i < bk.controlled_branches.size(); ++i)
      out << (i ? "," : "") << bk.controlled_branches[i];
    if (!bk.label.empty()) out << " " << bk.label;
    out << "\n";
  }

  out << "\n[machines]\n";
  for (const auto& g : m.machines)
    out << g.id << " " << g.bus << " " << fmt_double(g.rating_mva) << " " << fmt_double(g.h) << " "
        << fmt_double(g.d) << " " << fmt_double(g.xdp) << " " << fmt_double(g.governor_droop)
        << " " << fmt_double(g.governor_tc) << " " << fmt_double(g.p_dispatch_mw) << " "
        << fmt_double(g.emf) << "\n";

  out << "\n[inverters]\n";
  for (const auto& inv : m.inverters)
    out << inv.id << " " << inv.bus << " " << fmt_double(inv.rating_mva) << " "
        << fmt_double(inv.p_set_mw) << " " << fmt_double(inv.q_set_mvar) << " "
        << fmt_double(inv.mp) << " " << fmt_double(inv.mq) << " " << fmt_double(inv.filter_tc)
        << " " << fmt_double(inv.v_set) << " " << fmt_double(inv.x_out) << " -\n";

  out << "\n[faults]\n";
  for (const auto& f : m.faults) {
    Complex z = 1.0 / f.y_fault;
    out << f.id << " " << f.bus << " " << fmt_double(z.real()) << " " << fmt_double(z.imag())
        << " " << fmt_double(f.t_on) << " " << fmt_double(f.t_off) << " "
        << (f.bulk_fed_only ? 1 : 0) << "\n";
  }

  const auto& sc = m.scenario;
  out << "\n[scenario]\n";
  out << "mg_bus = " << sc.mg_bus << "\n";
  out << "load_scale = " << fmt_double(sc.load_scale) << "\n";
  out << "sys1_pv_mw = " << fmt_double(sc.sys1_pv_mw) << "\n";
  out << "sys1_sync_mw = " << fmt_double(sc.sys1_sync_mw) << "\n";
  out << "sys2_pv_mw = " << fmt_double(sc.sys2_pv_mw) << "\n";
  out << "sys2_sync_mw = " << fmt_double(sc.sys2_sync_mw) << "\n";
  out << "machine_rating_factor = " << fmt_double(sc.machine_rating_factor) << "\n";
  out << "inverter_rating_factor = " << fmt_double(sc.inverter_rating_factor) << "\n";
  out << "machine_h = " << fmt_double(sc.machine_h) << "\n";
  out << "machine_d = " << fmt_double(sc.machine_d) << "\n";
  out << "machine_xdp = " << fmt_double(sc.machine_xdp) << "\n";
  out << "machine_droop = " << fmt_double(sc.machine_droop) << "\n";
  out << "machine_tc = " << fmt_double(sc.machine_tc) << "\n";
  out << "inverter_mp = " << fmt_double(sc.inverter_mp) << "\n";
  out << "inverter_mq = " << fmt_double(sc.inverter_mq) << "\n";
  out << "inverter_filter_tc = " << fmt_double(sc.inverter_filter_tc) << "\n";
  out << "inverter_x_out = " << fmt_double(sc.inverter_x_out) << "\n";
  out << "mg_v_set = " << fmt_double(sc.mg_v_set) << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Admittance and topology

namespace {

bool branch_in_service(const Branch& br, const BreakerStates& states) {
  if (!br.breaker_id) return true;
  auto it = states.find(*br.breaker_id);
  if (it == states.end())
    throw std::invalid_argument("breaker_states missing entry for " + *br.breaker_id);
  return it->second == BreakerState::Closed;
}

} // namespace

SparseMatrixC build_admittance(const GridModel& m, const BreakerStates& breaker_states,
                               const std::vector<FaultSpec>& active_faults) {
  const int n = m.n_buses();
  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(m.branches.size() * 4 + n);

  for (const auto& br : m.branches) {
    if (!branch_in_service(br, breaker_states)) continue;
    int f = m.index_of_bus(br.from_bus);
    int t = m.index_of_bus(br.to_bus);
    Complex y = 1.0 / Complex(br.r, br.x);
    Complex ysh(0.0, br.b / 2.0);
    double a = br.tap;
    trip.emplace_back(f, f, (y + ysh) / (a * a));
    trip.emplace_back(t, t, y + ysh);
    trip.emplace_back(f, t, -y / a);
    trip.emplace_back(t, f, -y / a);
  }
  for (int i = 0; i < n; ++i)
    if (m.buses[i].shunt_b_pu != 0.0)
      trip.emplace_back(i, i, Complex(0.0, m.buses[i].shunt_b_pu));
  for (const auto& f : active_faults)
    trip.emplace_back(m.index_of_bus(f.bus), m.index_of_bus(f.bus), f.y_fault);

  SparseMatrixC Y(n, n);
  Y.setFromTriplets(trip.begin(), trip.end());
  return Y;
}

IslandPartition find_islands(const GridModel& m, const BreakerStates& breaker_states) {
  const int n = m.n_buses();
  std::vector<std::vector<int>> adj(n);
  for (const auto& br : m.branches) {
    if (!branch_in_service(br, breaker_states)) continue;
    int f = m.index_of_bus(br.from_bus);
    int t = m.index_of_bus(br.to_bus);
    adj[f].push_back(t);
    adj[t].push_back(f);
  }

  IslandPartition part;
  std::vector<int> comp(n, -1);
  for (int start = 0; start < n; ++start) {
    if (comp[start] >= 0) continue;
    int ci = static_cast<int>(part.islands.size());
    std::vector<int> stack{start}, members;
    comp[start] = ci;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      members.push_back(m.buses[u].id);
      for (int v : adj[u])
        if (comp[v] < 0) {
          comp[v] = ci;
          stack.push_back(v);
        }
    }
    std::sort(members.begin(), members.end());
    part.islands.push_back(std::move(members));
  }
  for (int i = 0; i < n; ++i) part.island_of[m.buses[i].id] = comp[i];

  part.energized.assign(part.islands.size(), false);
  part.has_slack.assign(part.islands.size(), false);
  for (const auto& g : m.machines) part.energized[part.island_of[g.bus]] = true;
  for (const auto& inv : m.inverters) part.energized[part.island_of[inv.bus]] = true;
  for (const auto& b : m.buses)
    if (b.kind == BusKind::Slack) part.has_slack[part.island_of[b.id]] = true;
  return part;
}

} // namespace gridstorm::model
