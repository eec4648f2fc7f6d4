#include <algorithm>
#include <cmath>
#include <optional>

#include "cdlgen/error.hpp"
#include "cdlgen/interpreter.hpp"
#include "util.hpp"

namespace cdlgen {

namespace {

constexpr std::string_view kCdl = "Buildings.Controls.OBC.CDL.";

template <class F>
class Pointwise final : public BlockState {
 public:
  explicit Pointwise(F f) : f_(std::move(f)) {}
  void step(const double* in, double* out, const StepInfo&) override { f_(in, out); }

 private:
  F f_;
};

template <class F>
std::unique_ptr<BlockState> pointwise(F f) {
  return std::make_unique<Pointwise<F>>(std::move(f));
}

PortDef R(const char* n) { return {n, SignalKind::Real}; }
PortDef B(const char* n) { return {n, SignalKind::Boolean}; }
PortDef I(const char* n) { return {n, SignalKind::Integer}; }

bool on(double v) { return v != 0; }
double bit(bool b) { return b ? 1.0 : 0.0; }

// Threshold comparison with hysteresis h: once true, stays true until the
// comparison fails by more than h.
class Compare final : public BlockState {
 public:
  Compare(bool greater, double h, bool against_param, double t)
      : greater_(greater), h_(h), against_param_(against_param), t_(t) {}

  void step(const double* in, double* out, const StepInfo&) override {
    double u = in[0];
    double ref = against_param_ ? t_ : in[1];
    bool y;
    if (greater_)
      y = pre_ ? u > ref - h_ : u > ref;
    else
      y = pre_ ? u < ref + h_ : u < ref;
    pre_ = y;
    out[0] = bit(y);
  }

 private:
  bool greater_;
  double h_;
  bool against_param_;
  double t_;
  bool pre_ = false;
};

class Hysteresis final : public BlockState {
 public:
  Hysteresis(double low, double high, bool pre) : low_(low), high_(high), pre_(pre), start_(pre) {}
  void step(const double* in, double* out, const StepInfo&) override {
    pre_ = pre_ ? in[0] >= low_ : in[0] > high_;
    out[0] = bit(pre_);
  }
  void initial(double* out) const override { out[0] = bit(start_); }

 private:
  double low_, high_;
  bool pre_, start_;
};

class TrueDelay final : public BlockState {
 public:
  explicit TrueDelay(long long steps) : steps_(steps) {}
  void step(const double* in, double* out, const StepInfo&) override {
    run_ = on(in[0]) ? run_ + 1 : 0;
    out[0] = bit(run_ > steps_);
  }

 private:
  long long steps_;
  long long run_ = 0;  // consecutive true samples including this one
};

class Latch final : public BlockState {
 public:
  void step(const double* in, double* out, const StepInfo&) override {
    bool u = on(in[0]), clr = on(in[1]);
    if (clr)
      y_ = false;
    else if (u && !u_prev_)
      y_ = true;
    u_prev_ = u;
    out[0] = bit(y_);
  }

 private:
  bool y_ = false;
  bool u_prev_ = false;
};

class Edge final : public BlockState {
 public:
  void step(const double* in, double* out, const StepInfo&) override {
    bool u = on(in[0]);
    out[0] = bit(u && !prev_);
    prev_ = u;
  }

 private:
  bool prev_ = false;
};

struct PidConfig {
  bool has_i = true;
  bool has_d = false;
  double k = 1, Ti = 1, Td = 0, r = 1, y_max = 1, y_min = 0, y_reset = 0;
  bool reverse = true;
  bool with_reset = false;
};

PidConfig pid_config(const ParamSet& p, bool with_reset) {
  PidConfig c;
  const std::string& type = p.text("controllerType");
  auto dot = type.rfind('.');
  std::string kind = dot == std::string::npos ? type : type.substr(dot + 1);
  if (kind == "P") {
    c.has_i = false;
  } else if (kind == "PI") {
  } else if (kind == "PD") {
    c.has_i = false;
    c.has_d = true;
  } else if (kind == "PID") {
    c.has_d = true;
  } else {
    throw ElaborationError("unknown controllerType '" + type + "'");
  }
  c.k = p.number("k");
  c.Ti = p.number("Ti");
  c.Td = p.number("Td");
  c.r = p.number("r");
  c.y_max = p.number("yMax");
  c.y_min = p.number("yMin");
  c.reverse = p.boolean("reverseActing");
  c.with_reset = with_reset;
  if (with_reset) c.y_reset = p.number("y_reset");
  if (c.r <= 0) throw ElaborationError("PID parameter r must be positive");
  if (c.has_i && c.Ti <= 0) throw ElaborationError("PID parameter Ti must be positive");
  if (c.y_max < c.y_min) throw ElaborationError("PID yMax is below yMin");
  return c;
}

// Forward-Euler PI(D). The integrator is frozen while the output is clamped;
// with a trigger the loop is an enabled controller whose integrator is
// preloaded with y_reset at the enable edge.
class Pid final : public BlockState {
 public:
  explicit Pid(PidConfig c) : c_(c) {}

  void step(const double* in, double* out, const StepInfo& info) override {
    double e = (c_.reverse ? in[0] - in[1] : in[1] - in[0]) / c_.r;
    if (c_.with_reset) {
      bool enabled = on(in[2]);
      bool rising = enabled && !was_enabled_;
      was_enabled_ = enabled;
      if (!enabled) {
        out[0] = c_.y_reset;
        e_prev_.reset();
        return;
      }
      if (rising && c_.has_i) integ_ = c_.y_reset;
    }
    double d = 0;
    if (c_.has_d && e_prev_) d = c_.k * c_.Td * (e - *e_prev_) / info.dt;
    e_prev_ = e;
    double v = c_.k * e + integ_ + d;
    double y = std::clamp(v, c_.y_min, c_.y_max);
    if (c_.has_i && y == v) integ_ += c_.k * e * info.dt / c_.Ti;
    out[0] = y;
  }

  void initial(double* out) const override {
    out[0] = c_.with_reset ? c_.y_reset : std::clamp(0.0, c_.y_min, c_.y_max);
  }

 private:
  PidConfig c_;
  double integ_ = 0;
  std::optional<double> e_prev_;
  bool was_enabled_ = false;
};

// dt == 0 validates the parameter only.
long long delay_steps(const ParamSet& p, double dt) {
  double d = p.number("delayTime");
  if (d < 0) throw ElaborationError("delayTime must not be negative");
  if (dt == 0) return 0;
  double q = d / dt;
  double r = std::round(q);
  if (std::fabs(q - r) > 1e-9 * std::max(1.0, q))
    throw SimulationError("step size " + util::format_real(dt) + " s does not divide delayTime " +
                          util::format_real(d) + " s");
  return static_cast<long long>(r);
}

long long integral(const ParamSet& p, std::string_view name) {
  double v = p.number(name);
  if (v != std::floor(v)) throw ElaborationError("parameter " + std::string(name) + " must be an integer");
  return static_cast<long long>(v);
}

void add_logic(BehaviorRegistry& reg, const std::string& prefix, const std::string& switch_name) {
  reg.add({prefix + "And", {B("u1"), B("u2")}, {B("y")}, {}, false,
           [](const ParamSet&, double) { return pointwise([](const double* in, double* out) { out[0] = bit(on(in[0]) && on(in[1])); }); }});
  reg.add({prefix + "Or", {B("u1"), B("u2")}, {B("y")}, {}, false,
           [](const ParamSet&, double) { return pointwise([](const double* in, double* out) { out[0] = bit(on(in[0]) || on(in[1])); }); }});
  reg.add({prefix + "Not", {B("u")}, {B("y")}, {}, false,
           [](const ParamSet&, double) { return pointwise([](const double* in, double* out) { out[0] = bit(!on(in[0])); }); }});
  reg.add({prefix + switch_name, {B("u1"), B("u2"), B("u3")}, {B("y")}, {}, false,
           [](const ParamSet&, double) { return pointwise([](const double* in, double* out) { out[0] = on(in[1]) ? in[0] : in[2]; }); }});
}

template <class F>
BehaviorDef binary_real(std::string name, F f) {
  return {std::move(name), {R("u1"), R("u2")}, {R("y")}, {}, false,
          [f](const ParamSet&, double) { return pointwise([f](const double* in, double* out) { out[0] = f(in[0], in[1]); }); }};
}

BehaviorRegistry build_default() {
  BehaviorRegistry reg;
  const std::string cdl(kCdl);
  const std::string L = cdl + "Logical.", Rl = cdl + "Reals.", In = cdl + "Integers.", Cv = cdl + "Conversions.";

  add_logic(reg, L, "Switch");
  add_logic(reg, "Modelica.Blocks.Logical.", "LogicalSwitch");

  reg.add({L + "TrueDelay", {B("u")}, {B("y")}, {{"delayTime", "0"}, {"delayOnInit", "false"}}, true,
           [](const ParamSet& p, double dt) {
             return std::unique_ptr<BlockState>(std::make_unique<TrueDelay>(delay_steps(p, dt)));
           }});
  reg.add({L + "Latch", {B("u"), B("clr")}, {B("y")}, {}, true,
           [](const ParamSet&, double) { return std::unique_ptr<BlockState>(std::make_unique<Latch>()); }});
  reg.add({L + "Edge", {B("u")}, {B("y")}, {}, false,
           [](const ParamSet&, double) { return std::unique_ptr<BlockState>(std::make_unique<Edge>()); }});
  reg.add({L + "Sources.Constant", {}, {B("y")}, {{"k", "true"}}, false,
           [](const ParamSet& p, double) {
             double k = bit(p.boolean("k"));
             return pointwise([k](const double*, double* out) { out[0] = k; });
           }});

  reg.add(binary_real(Rl + "Add", [](double a, double b) { return a + b; }));
  reg.add(binary_real(Rl + "Subtract", [](double a, double b) { return a - b; }));
  reg.add(binary_real(Rl + "Multiply", [](double a, double b) { return a * b; }));
  reg.add(binary_real(Rl + "Max", [](double a, double b) { return std::max(a, b); }));
  reg.add(binary_real(Rl + "Min", [](double a, double b) { return std::min(a, b); }));
  reg.add({Rl + "Abs", {R("u")}, {R("y")}, {}, false,
           [](const ParamSet&, double) { return pointwise([](const double* in, double* out) { out[0] = std::fabs(in[0]); }); }});
  reg.add({Rl + "MultiplyByParameter", {R("u")}, {R("y")}, {{"k", "1"}}, false,
           [](const ParamSet& p, double) {
             double k = p.number("k");
             return pointwise([k](const double* in, double* out) { out[0] = k * in[0]; });
           }});
  reg.add({Rl + "Limiter", {R("u")}, {R("y")}, {{"uMax", "1"}, {"uMin", "0"}}, false,
           [](const ParamSet& p, double) {
             double hi = p.number("uMax"), lo = p.number("uMin");
             if (hi < lo) throw ElaborationError("Limiter uMax is below uMin");
             return pointwise([hi, lo](const double* in, double* out) { out[0] = std::clamp(in[0], lo, hi); });
           }});
  reg.add({Rl + "Switch", {R("u1"), B("u2"), R("u3")}, {R("y")}, {}, false,
           [](const ParamSet&, double) { return pointwise([](const double* in, double* out) { out[0] = on(in[1]) ? in[0] : in[2]; }); }});
  reg.add({Rl + "GreaterThreshold", {R("u")}, {B("y")}, {{"t", "0"}, {"h", "0"}}, false,
           [](const ParamSet& p, double) {
             return std::unique_ptr<BlockState>(std::make_unique<Compare>(true, p.number("h"), true, p.number("t")));
           }});
  reg.add({Rl + "LessThreshold", {R("u")}, {B("y")}, {{"t", "0"}, {"h", "0"}}, false,
           [](const ParamSet& p, double) {
             return std::unique_ptr<BlockState>(std::make_unique<Compare>(false, p.number("h"), true, p.number("t")));
           }});
  reg.add({Rl + "Greater", {R("u1"), R("u2")}, {B("y")}, {{"h", "0"}}, false,
           [](const ParamSet& p, double) {
             return std::unique_ptr<BlockState>(std::make_unique<Compare>(true, p.number("h"), false, 0));
           }});
  reg.add({Rl + "Less", {R("u1"), R("u2")}, {B("y")}, {{"h", "0"}}, false,
           [](const ParamSet& p, double) {
             return std::unique_ptr<BlockState>(std::make_unique<Compare>(false, p.number("h"), false, 0));
           }});
  reg.add({Rl + "Hysteresis", {R("u")}, {B("y")}, {{"uLow", "0"}, {"uHigh", "1"}, {"pre_y_start", "false"}}, true,
           [](const ParamSet& p, double) {
             double lo = p.number("uLow"), hi = p.number("uHigh");
             if (!(hi > lo)) throw ElaborationError("Hysteresis needs uHigh > uLow");
             return std::unique_ptr<BlockState>(std::make_unique<Hysteresis>(lo, hi, p.boolean("pre_y_start")));
           }});
  const std::map<std::string, std::string> pid_defaults{
      {"controllerType", cdl + "Types.SimpleController.PI"},
      {"k", "1"}, {"Ti", "0.5"}, {"Td", "0.1"}, {"r", "1"}, {"yMax", "1"}, {"yMin", "0"},
      {"reverseActing", "true"}};
  reg.add({Rl + "PID", {R("u_s"), R("u_m")}, {R("y")}, pid_defaults, true,
           [](const ParamSet& p, double) { return std::unique_ptr<BlockState>(std::make_unique<Pid>(pid_config(p, false))); }});
  auto reset_defaults = pid_defaults;
  reset_defaults["y_reset"] = "0";
  reg.add({Rl + "PIDWithReset", {R("u_s"), R("u_m"), B("trigger")}, {R("y")}, reset_defaults, true,
           [](const ParamSet& p, double) { return std::unique_ptr<BlockState>(std::make_unique<Pid>(pid_config(p, true))); }});
  reg.add({Rl + "Sources.Constant", {}, {R("y")}, {{"k", "0"}}, false,
           [](const ParamSet& p, double) {
             double k = p.number("k");
             return pointwise([k](const double*, double* out) { out[0] = k; });
           }});

  reg.add({In + "Switch", {I("u1"), B("u2"), I("u3")}, {I("y")}, {}, false,
           [](const ParamSet&, double) { return pointwise([](const double* in, double* out) { out[0] = on(in[1]) ? in[0] : in[2]; }); }});
  reg.add({In + "Equal", {I("u1"), I("u2")}, {B("y")}, {}, false,
           [](const ParamSet&, double) { return pointwise([](const double* in, double* out) { out[0] = bit(in[0] == in[1]); }); }});
  reg.add({In + "Sources.Constant", {}, {I("y")}, {{"k", "0"}}, false,
           [](const ParamSet& p, double) {
             double k = static_cast<double>(integral(p, "k"));
             return pointwise([k](const double*, double* out) { out[0] = k; });
           }});

  reg.add({Cv + "BooleanToReal", {B("u")}, {R("y")}, {{"realTrue", "1"}, {"realFalse", "0"}}, false,
           [](const ParamSet& p, double) {
             double t = p.number("realTrue"), f = p.number("realFalse");
             return pointwise([t, f](const double* in, double* out) { out[0] = on(in[0]) ? t : f; });
           }});
  reg.add({Cv + "BooleanToInteger", {B("u")}, {I("y")}, {{"integerTrue", "1"}, {"integerFalse", "0"}}, false,
           [](const ParamSet& p, double) {
             double t = static_cast<double>(integral(p, "integerTrue"));
             double f = static_cast<double>(integral(p, "integerFalse"));
             return pointwise([t, f](const double* in, double* out) { out[0] = on(in[0]) ? t : f; });
           }});
  return reg;
}

}  // namespace

void BlockState::initial(double* out) const { out[0] = 0; }

void BehaviorRegistry::add(BehaviorDef def) {
  auto name = def.fqn;
  defs_.insert_or_assign(std::move(name), std::move(def));
}

const BehaviorDef* BehaviorRegistry::find(std::string_view fqn) const {
  auto it = defs_.find(fqn);
  return it == defs_.end() ? nullptr : &it->second;
}

std::vector<std::string> BehaviorRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : defs_) out.push_back(k);
  return out;
}

const BehaviorRegistry& default_registry() {
  static const BehaviorRegistry reg = build_default();
  return reg;
}

}  // namespace cdlgen
