#include "cdlgen/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "cdlgen/error.hpp"
#include "util.hpp"

namespace cdlgen {

namespace {

constexpr double kEps = 1e-9;

using Values = std::map<std::string, double>;

// Piecewise-constant input columns, filled segment by segment.
class ProbeBuilder {
 public:
  ProbeBuilder(const ReferenceTask& task, double step, double horizon)
      : task_(task), step_(step), horizon_(horizon), total_(step_count(step, horizon)) {}

  std::size_t size() const { return len_; }
  std::size_t total() const { return total_; }

  void hold(const Values& v, std::size_t steps) {
    steps = std::min(steps, total_ - len_);
    for (const auto& in : task_.inputs) {
      auto& col = cols_[in.name];
      col.insert(col.end(), steps, v.at(in.name));
    }
    len_ += steps;
  }

  // Settles at `low`, then switches to `high`; returns the last step of
  // each segment.
  std::pair<std::size_t, std::size_t> direction(const Values& low, const Values& high) {
    hold(low, kSettle);
    std::size_t lo = len_ - 1;
    hold(high, kStep);
    return {lo, len_ - 1};
  }

  SimulationTrace build() const {
    SimulationTrace t;
    t.step_size = step_;
    t.horizon = horizon_;
    for (const auto& in : task_.inputs) {
      Series s;
      for (double v : cols_.at(in.name)) {
        switch (in.kind) {
          case SignalKind::Real: s.emplace_back(v); break;
          case SignalKind::Boolean: s.emplace_back(v != 0); break;
          case SignalKind::Integer: s.emplace_back(static_cast<long long>(std::llround(v))); break;
        }
      }
      t.add(in.name, std::move(s));
    }
    return t;
  }

  static constexpr std::size_t kSettle = 30;
  static constexpr std::size_t kStep = 6;
  static constexpr std::size_t kDirection = kSettle + kStep;

 private:
  const ReferenceTask& task_;
  double step_, horizon_;
  std::size_t total_;
  std::size_t len_ = 0;
  std::map<std::string, std::vector<double>> cols_;
};

std::vector<double> column(const SimulationTrace& t, std::string_view port) {
  const auto& s = probe(t, port);
  std::vector<double> out;
  out.reserve(s.size());
  for (const auto& v : s) out.push_back(as_double(v));
  return out;
}

std::string at(std::size_t n, double step) {
  return "t=" + util::format_real(static_cast<double>(n) * step) + " s";
}

double param(const ReferenceTask& task, const char* name, double fallback) {
  const TaskParam* p = task.find_param(name);
  return p ? p->value : fallback;
}

template <class T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

std::size_t length(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// True when every input holds its value from n-1 to n.
bool steady(const SimulationTrace& t, const std::vector<std::string>& inputs, std::size_t n) {
  if (n == 0) return false;
  for (const auto& name : inputs) {
    const auto& s = probe(t, name);
    if (as_double(s[n]) != as_double(s[n - 1])) return false;
  }
  return true;
}

std::vector<std::string> input_names(const ReferenceTask& task) {
  std::vector<std::string> out;
  for (const auto& p : task.inputs) out.push_back(p.name);
  return out;
}

TraceCheck range_check(std::string out, double lo, double hi) {
  return [=](const SimulationTrace& t) -> std::optional<std::string> {
    auto y = column(t, out);
    for (std::size_t n = 0; n < y.size(); ++n)
      if (y[n] < lo - kEps || y[n] > hi + kEps)
        return out + "=" + util::format_real(y[n]) + " outside [" + util::format_real(lo) + ", " +
               util::format_real(hi) + "] at " + at(n, t.step_size);
    return std::nullopt;
  };
}

// Output moves with `sign` from the end of the low segment to the end of the
// high segment (strictly).
TraceCheck direction_check(std::string out, std::size_t lo, std::size_t hi, int sign) {
  return [=](const SimulationTrace& t) -> std::optional<std::string> {
    auto y = column(t, out);
    double d = y[hi] - y[lo];
    if (sign * d > kEps) return std::nullopt;
    return out + " went " + util::format_real(y[lo]) + " -> " + util::format_real(y[hi]) + " between " +
           at(lo, t.step_size) + " and " + at(hi, t.step_size) + ", expected " + (sign > 0 ? "a rise" : "a fall");
  };
}

// Within runs of constant inputs the output must not
// move against `want(n)` (+1 non-decreasing, -1 non-increasing, 0 free).
TraceCheck monotone_check(std::string out, std::vector<std::string> inputs,
                          std::function<int(const SimulationTrace&, std::size_t)> want) {
  return [=](const SimulationTrace& t) -> std::optional<std::string> {
    auto y = column(t, out);
    for (std::size_t n = 1; n < y.size(); ++n) {
      if (!steady(t, inputs, n)) continue;
      int w = want(t, n);
      if (w == 0) continue;
      double d = y[n] - y[n - 1];
      if (w * d < -kEps)
        return out + " moved " + util::format_real(y[n - 1]) + " -> " + util::format_real(y[n]) + " at " +
               at(n, t.step_size) + " against the required direction";
    }
    return std::nullopt;
  };
}

double sample(const SimulationTrace& t, std::string_view port, std::size_t n) {
  return as_double(probe(t, port)[n]);
}

int sgn(double v) { return v > kEps ? 1 : v < -kEps ? -1 : 0; }

// ---------------------------------------------------------------------------

ConformanceOracle chiller_enable(const ReferenceTask& task, const OracleOptions& opt) {
  ConformanceOracle o{"O1", 10, 3600, {}, {}};
  const double ban = param(task, "TDeaBan", 1);
  ProbeBuilder pb(task, o.step_size, o.horizon);
  std::mt19937_64 rng(opt.seed);
  const std::vector<double> offsets = {-1, 0, ban / 2, ban + 0.5, ban + 2};
  const std::vector<double> sets = {280, 279.5};
  auto seg = [&](double set, double off, std::size_t n) { pb.hold({{"TChiSet", set}, {"TChi_CHWST", set + off}}, n); };
  for (double off : {ban / 2, ban + 0.5, ban / 2, 0.0, ban / 2, -1.0, ban + 2, ban / 2, -1.0}) seg(280, off, 3);
  while (pb.size() < pb.total()) seg(pick(sets, rng), pick(offsets, rng), length(rng, 1, 6));
  o.probe = pb.build();

  auto dif = [](const SimulationTrace& t, std::size_t n) { return sample(t, "TChi_CHWST", n) - sample(t, "TChiSet", n); };
  o.predicates.push_back({"enable_above_deadband", {1}, [=](const SimulationTrace& t) -> std::optional<std::string> {
                            auto y = column(t, "y");
                            for (std::size_t n = 0; n < y.size(); ++n)
                              if (dif(t, n) > ban && y[n] == 0) return "y false above the deadband at " + at(n, t.step_size);
                            return std::nullopt;
                          }});
  o.predicates.push_back({"disable_at_or_below_setpoint", {2}, [=](const SimulationTrace& t) -> std::optional<std::string> {
                            auto y = column(t, "y");
                            for (std::size_t n = 0; n < y.size(); ++n)
                              if (dif(t, n) <= 0 && y[n] != 0) return "y true at or below the setpoint at " + at(n, t.step_size);
                            return std::nullopt;
                          }});
  o.predicates.push_back({"hold_inside_deadband", {3}, [=](const SimulationTrace& t) -> std::optional<std::string> {
                            auto y = column(t, "y");
                            for (std::size_t n = 1; n < y.size(); ++n) {
                              double d = dif(t, n);
                              if (d > 0 && d <= ban && y[n] != y[n - 1])
                                return "y toggled inside the deadband at " + at(n, t.step_size);
                            }
                            return std::nullopt;
                          }});
  return o;
}

ConformanceOracle bypass_valve(const ReferenceTask& task, const OracleOptions& opt) {
  ConformanceOracle o{"O2", 10, 3600, {}, {}};
  ProbeBuilder pb(task, o.step_size, o.horizon);
  std::mt19937_64 rng(opt.seed);
  auto seg = [&](double set, double off, bool pump, std::size_t n) {
    pb.hold({{"VChiWatSet_flow", set}, {"VChiWat_flow", set + off}, {"uChiWatPum", pump ? 1.0 : 0.0}}, n);
  };
  seg(0.05, -0.01, false, 3);
  seg(0.05, -0.01, true, 6);
  seg(0.05, 0.02, true, 6);
  seg(0.05, 0.02, false, 3);
  seg(0.05, 0.01, true, 6);
  const std::vector<double> sets = {0.05, 0.04};
  const std::vector<double> offs = {-0.03, -0.01, 0.01, 0.03};
  while (pb.size() < pb.total() - ProbeBuilder::kDirection)
    seg(pick(sets, rng), pick(offs, rng), std::bernoulli_distribution(0.75)(rng), length(rng, 2, 10));
  const auto& pol = *task.polarity;
  auto [lo, hi] = pb.direction(task.probe_low, task.probe_high);
  o.probe = pb.build();

  auto inputs = input_names(task);
  auto err = [](const SimulationTrace& t, std::size_t n) {
    if (sample(t, "uChiWatPum", n) == 0) return 0;
    return sgn(sample(t, "VChiWatSet_flow", n) - sample(t, "VChiWat_flow", n));
  };
  o.predicates.push_back({"open_when_pumps_off", {3}, [](const SimulationTrace& t) -> std::optional<std::string> {
                            auto y = column(t, "yValPos");
                            for (std::size_t n = 0; n < y.size(); ++n)
                              if (sample(t, "uChiWatPum", n) == 0 && y[n] != 1.0)
                                return "yValPos=" + util::format_real(y[n]) + " with pumps off at " + at(n, t.step_size);
                            return std::nullopt;
                          }});
  o.predicates.push_back({"valve_range", {1}, range_check("yValPos", 0, 1)});
  o.predicates.push_back({"opens_below_setpoint", {1, 2}, monotone_check("yValPos", inputs, [=](auto& t, auto n) {
                            return err(t, n) > 0 ? 1 : 0;
                          })});
  o.predicates.push_back({"closes_above_setpoint", {1, 2}, monotone_check("yValPos", inputs, [=](auto& t, auto n) {
                            return err(t, n) < 0 ? -1 : 0;
                          })});
  o.predicates.push_back({"starts_fully_open", {4}, [](const SimulationTrace& t) -> std::optional<std::string> {
                            auto y = column(t, "yValPos");
                            for (std::size_t n = 1; n < y.size(); ++n) {
                              bool edge = sample(t, "uChiWatPum", n) != 0 && sample(t, "uChiWatPum", n - 1) == 0;
                              if (edge && sample(t, "VChiWat_flow", n) < sample(t, "VChiWatSet_flow", n) && y[n] != 1.0)
                                return "yValPos=" + util::format_real(y[n]) + " when the loop was enabled at " +
                                       at(n, t.step_size);
                            }
                            return std::nullopt;
                          }});
  int sign = pol.sign * sgn(task.probe_high.at(pol.error_input) - task.probe_low.at(pol.error_input));
  o.predicates.push_back({"action_direction", {2}, direction_check(pol.output, lo, hi, sign)});
  return o;
}

ConformanceOracle tower_fan(const ReferenceTask& task, const OracleOptions& opt) {
  ConformanceOracle o{"O3", 10, 3600, {}, {}};
  ProbeBuilder pb(task, o.step_size, o.horizon);
  std::mt19937_64 rng(opt.seed);
  auto seg = [&](int mode, double cw_off, double chw_off, std::size_t n) {
    pb.hold({{"TCWSupSet", 302},
             {"TCWSup", 302 + cw_off},
             {"TCHWSupSet", 280},
             {"TCHWSup", 280 + chw_off},
             {"cooMod", static_cast<double>(mode)}},
            n);
  };
  seg(1, 2, 0, 6);
  seg(2, 2, 0, 4);
  seg(3, 0, -2, 6);
  seg(1, -2, 0, 6);
  const std::vector<double> offs = {-2, -0.5, 0.5, 2};
  while (pb.size() < pb.total() - 2 * ProbeBuilder::kDirection)
    seg(static_cast<int>(length(rng, 1, 3)), pick(offs, rng), pick(offs, rng), length(rng, 3, 12));
  const auto& pol = *task.polarity;
  auto [lo1, hi1] = pb.direction(task.probe_low, task.probe_high);
  Values low3 = {{"TCWSupSet", 302}, {"TCWSup", 302}, {"TCHWSupSet", 280}, {"TCHWSup", 279}, {"cooMod", 3}};
  Values high3 = low3;
  high3["TCHWSup"] = 281;
  auto [lo3, hi3] = pb.direction(low3, high3);
  o.probe = pb.build();

  auto inputs = input_names(task);
  auto tracked = [](const char* meas, const char* set, long long mode) {
    return [=](const SimulationTrace& t, std::size_t n) {
      if (std::llround(sample(t, "cooMod", n)) != mode) return 0;
      return sgn(sample(t, meas, n) - sample(t, set, n));
    };
  };
  o.predicates.push_back({"part_mechanical_full_speed", {2}, [](const SimulationTrace& t) -> std::optional<std::string> {
                            auto y = column(t, "y");
                            for (std::size_t n = 0; n < y.size(); ++n)
                              if (std::llround(sample(t, "cooMod", n)) == 2 && y[n] != 1.0)
                                return "y=" + util::format_real(y[n]) + " in part mechanical cooling at " + at(n, t.step_size);
                            return std::nullopt;
                          }});
  o.predicates.push_back({"fan_range", {1, 3}, range_check("y", 0, 1)});
  o.predicates.push_back({"mode1_tracks_condenser_water", {1, 4}, monotone_check("y", inputs, tracked("TCWSup", "TCWSupSet", 1))});
  o.predicates.push_back({"mode3_tracks_chilled_water", {3, 4}, monotone_check("y", inputs, tracked("TCHWSup", "TCHWSupSet", 3))});
  int sign = pol.sign * sgn(task.probe_high.at(pol.error_input) - task.probe_low.at(pol.error_input));
  o.predicates.push_back({"mode1_direction", {1, 4}, direction_check(pol.output, lo1, hi1, sign)});
  o.predicates.push_back({"mode3_direction", {3, 4}, direction_check(pol.output, lo3, hi3, pol.sign)});
  return o;
}

ConformanceOracle plant_requests(const ReferenceTask& task, const OracleOptions& opt) {
  ConformanceOracle o{"O4", 10, 3600, {}, {}};
  PlantRequestParams p{param(task, "TDif3", 3),     param(task, "TDif2", 2),       param(task, "delTim", 120),
                       param(task, "uValHig", 0.95), param(task, "uValLow", 0.85), param(task, "uValPla", 0.10),
                       opt.temperature_hysteresis};
  ProbeBuilder pb(task, o.step_size, o.horizon);
  std::mt19937_64 rng(opt.seed);
  // Offsets and valve positions stay clear of every threshold band.
  const double m = std::max(0.5, 2 * p.hysteresis);
  const std::vector<double> offs = {0, p.tdif2 - 2 * m, (p.tdif2 + p.tdif3) / 2, p.tdif3 + m};
  const std::vector<double> valves = {p.val_plant / 2, (p.val_plant + p.val_low) / 2 - 0.1,
                                      (p.val_plant + p.val_low) / 2 + 0.1, (p.val_low + p.val_high) / 2 - 0.02,
                                      (p.val_high + 1) / 2};
  const std::vector<double> sets = {286, 287};
  auto seg = [&](double set, double off, double valve, std::size_t n) {
    pb.hold({{"TAirSupSet", set}, {"TAirSup", set + off}, {"uCooCoi", valve}}, n);
  };
  seg(286, offs[3], valves[1], 15);
  seg(286, offs[2], valves[1], 15);
  seg(286, offs[0], valves[4], 5);
  seg(286, offs[0], valves[3], 5);
  seg(286, offs[0], valves[2], 5);
  seg(286, offs[0], valves[0], 3);
  double off = offs[0], valve = valves[0], set = sets[0];
  while (pb.size() < pb.total()) {
    if (std::bernoulli_distribution(0.6)(rng)) off = pick(offs, rng);
    if (std::bernoulli_distribution(0.5)(rng)) valve = pick(valves, rng);
    if (std::bernoulli_distribution(0.2)(rng)) set = pick(sets, rng);
    seg(set, off, valve, length(rng, 3, 20));
  }
  o.probe = pb.build();

  auto expected = [p](const SimulationTrace& t) {
    return plant_requests_oracle(column(t, "TAirSup"), column(t, "TAirSupSet"), column(t, "uCooCoi"), t.step_size, p);
  };
  o.predicates.push_back({"request_range", {1, 2, 3, 4, 5}, [](const SimulationTrace& t) -> std::optional<std::string> {
                            auto r = column(t, "yChiWatResReq"), q = column(t, "yChiPlaReq");
                            for (std::size_t n = 0; n < r.size(); ++n) {
                              if (r[n] != 0 && r[n] != 1 && r[n] != 2 && r[n] != 3)
                                return "yChiWatResReq=" + util::format_real(r[n]) + " at " + at(n, t.step_size);
                              if (q[n] != 0 && q[n] != 1) return "yChiPlaReq=" + util::format_real(q[n]) + " at " + at(n, t.step_size);
                            }
                            return std::nullopt;
                          }});
  auto tier = [expected](long long k) {
    return [=](const SimulationTrace& t) -> std::optional<std::string> {
      auto want = expected(t).first;
      auto got = column(t, "yChiWatResReq");
      for (std::size_t n = 0; n < got.size(); ++n)
        if (want[n] == k && got[n] != static_cast<double>(k))
          return "yChiWatResReq=" + util::format_real(got[n]) + ", expected " + std::to_string(k) + " at " +
                 at(n, t.step_size);
      return std::nullopt;
    };
  };
  o.predicates.push_back({"tier3_after_sustained_offset", {1, 6}, tier(3)});
  o.predicates.push_back({"tier2_after_sustained_offset", {2, 6}, tier(2)});
  o.predicates.push_back({"tier1_while_valve_latched", {3}, tier(1)});
  o.predicates.push_back({"tier0_otherwise", {4}, tier(0)});
  o.predicates.push_back({"plant_request_latch", {5}, [expected](const SimulationTrace& t) -> std::optional<std::string> {
                            auto want = expected(t).second;
                            auto got = column(t, "yChiPlaReq");
                            for (std::size_t n = 0; n < got.size(); ++n)
                              if (got[n] != static_cast<double>(want[n]))
                                return "yChiPlaReq=" + util::format_real(got[n]) + ", expected " +
                                       std::to_string(want[n]) + " at " + at(n, t.step_size);
                            return std::nullopt;
                          }});
  return o;
}

ConformanceOracle relief_damper(const ReferenceTask& task, const OracleOptions& opt) {
  ConformanceOracle o{"O5", 10, 3600, {}, {}};
  const double set = param(task, "dpBuiSet", 12);
  ProbeBuilder pb(task, o.step_size, o.horizon);
  std::mt19937_64 rng(opt.seed);
  auto seg = [&](double dp, bool fan, std::size_t n) { pb.hold({{"dpBui", dp}, {"u1SupFan", fan ? 1.0 : 0.0}}, n); };
  seg(set + 3, false, 3);
  seg(set + 1, true, 4);
  seg(set - 1, true, 4);
  const std::vector<double> offs = {-3, -1, -0.5, 0, 0.5, 1, 3};
  while (pb.size() < pb.total() - ProbeBuilder::kDirection)
    seg(set + pick(offs, rng), std::bernoulli_distribution(0.7)(rng), length(rng, 1, 8));
  const auto& pol = *task.polarity;
  auto [lo, hi] = pb.direction(task.probe_low, task.probe_high);
  o.probe = pb.build();

  o.predicates.push_back({"closed_when_fan_off", {3}, [](const SimulationTrace& t) -> std::optional<std::string> {
                            auto y = column(t, "yRelDam");
                            for (std::size_t n = 0; n < y.size(); ++n)
                              if (sample(t, "u1SupFan", n) == 0 && y[n] != 0.0)
                                return "yRelDam=" + util::format_real(y[n]) + " with the fan off at " + at(n, t.step_size);
                            return std::nullopt;
                          }});
  o.predicates.push_back({"damper_range", {2}, range_check("yRelDam", 0, 1)});
  // A P-only loop is a static map from pressure to position.
  o.predicates.push_back({"static_in_pressure", {2}, [](const SimulationTrace& t) -> std::optional<std::string> {
                            auto y = column(t, "yRelDam"), dp = column(t, "dpBui");
                            std::map<double, std::size_t> first;
                            for (std::size_t n = 0; n < y.size(); ++n) {
                              if (sample(t, "u1SupFan", n) == 0) continue;
                              auto [it, fresh] = first.emplace(dp[n], n);
                              if (!fresh && std::abs(y[it->second] - y[n]) > kEps)
                                return "yRelDam differs at dpBui=" + util::format_real(dp[n]) + ": " +
                                       util::format_real(y[it->second]) + " (" + at(it->second, t.step_size) + ") vs " +
                                       util::format_real(y[n]) + " (" + at(n, t.step_size) + ")";
                            }
                            return std::nullopt;
                          }});
  int sign = pol.sign * sgn(task.probe_high.at(pol.error_input) - task.probe_low.at(pol.error_input));
  o.predicates.push_back({"opens_above_setpoint", {1, 2}, direction_check(pol.output, lo, hi, sign)});
  return o;
}

}  // namespace

ConformanceOracle make_oracle(const ReferenceTask& task, const OracleOptions& options) {
  const auto& id = task.oracle_id;
  bool needs_polarity = id == "O2" || id == "O3" || id == "O5";
  if (needs_polarity && !task.polarity) throw ConfigError("oracle " + id + " needs a task polarity declaration");
  if (id == "O1") return chiller_enable(task, options);
  if (id == "O2") return bypass_valve(task, options);
  if (id == "O3") return tower_fan(task, options);
  if (id == "O4") return plant_requests(task, options);
  if (id == "O5") return relief_damper(task, options);
  throw ConfigError("unknown oracle '" + id + "'");
}

ConformanceResult check_conformance(const ConformanceOracle& oracle, const ModelicaBlock& block,
                                    const LibraryIndex& index) {
  ConformanceResult r;
  r.trace = simulate(elaborate(block, index), oracle.probe, oracle.step_size, oracle.horizon);
  r.passed = true;
  for (const auto& p : oracle.predicates) {
    PredicateVerdict v{p.name, true, ""};
    try {
      if (auto why = p.check(r.trace)) {
        v.holds = false;
        v.detail = *why;
      }
    } catch (const UnknownPort& e) {
      v.holds = false;
      v.detail = e.what();
    }
    r.passed = r.passed && v.holds;
    r.verdicts.push_back(std::move(v));
  }
  return r;
}

std::pair<std::vector<long long>, std::vector<long long>> plant_requests_oracle(const std::vector<double>& tsup,
                                                                                const std::vector<double>& tset,
                                                                                const std::vector<double>& valve,
                                                                                double step_size,
                                                                                const PlantRequestParams& p) {
  const std::size_t n = tsup.size();
  const auto window = static_cast<std::size_t>(std::llround(p.delay / step_size));
  std::vector<bool> above3(n), above2(n);
  bool a3 = false, a2 = false;
  for (std::size_t i = 0; i < n; ++i) {
    double d = tsup[i] - tset[i];
    a3 = a3 ? d > p.tdif3 - p.hysteresis : d > p.tdif3;
    a2 = a2 ? d > p.tdif2 - p.hysteresis : d > p.tdif2;
    above3[i] = a3;
    above2[i] = a2;
  }
  auto sustained = [&](const std::vector<bool>& c, std::size_t i) {
    if (i < window) return false;
    for (std::size_t k = i - window; k <= i; ++k)
      if (!c[k]) return false;
    return true;
  };
  std::vector<long long> res(n), pla(n);
  bool res_lat = false, pla_lat = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (valve[i] > p.val_high)
      res_lat = pla_lat = true;
    if (valve[i] < p.val_low) res_lat = false;
    if (valve[i] < p.val_plant) pla_lat = false;
    res[i] = sustained(above3, i) ? 3 : sustained(above2, i) ? 2 : res_lat ? 1 : 0;
    pla[i] = pla_lat ? 1 : 0;
  }
  return {res, pla};
}

}  // namespace cdlgen
