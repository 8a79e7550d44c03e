#include "geostore/config.hpp"

#include "geostore/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace geostore::config {

namespace {

using Cfg = ExperimentConfig;

// Accepted spellings of one physical quantity and their factors to the
// working unit (the first entry).
struct UnitDef {
  std::vector<std::pair<std::string, double>> spellings;
  const std::string& canonical() const { return spellings.front().first; }
};

std::string squash(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c != ' ' && c != '\t') out += c;
  }
  return out;
}

const UnitDef kNone{{{"", 1.0}}};
const UnitDef kLength{{{"m", 1.0}, {"cm", 1e-2}, {"mm", 1e-3}}};
const UnitDef kArea{{{"m^2", 1.0}}};
const UnitDef kDensity{{{"kg/m^3", 1.0}}};
const UnitDef kMass{{{"kg", 1.0}, {"t", 1e3}}};
const UnitDef kHeatCapacity{{{"J/(kg K)", 1.0}, {"kJ/(kg K)", 1e3}}};
const UnitDef kConductivity{{{"W/(m K)", 1.0}, {"J/(s m K)", 1.0}, {"J/(m K s)", 1.0}}};
const UnitDef kTransfer{{{"W/(m^2 K)", 1.0}, {"J/(s m^2 K)", 1.0}}};
const UnitDef kVelocity{{{"m/s", 1.0}, {"m/h", 1.0 / 3600.0}}};
const UnitDef kTemperature{{{"C", 1.0}, {"°C", 1.0}, {"degC", 1.0}}};
const UnitDef kTempDiff{{{"K", 1.0}}};
const UnitDef kPower{{{"kW", 1.0}, {"W", 1e-3}, {"J/s", 1e-3}, {"MJ/h", 1.0 / 3.6}}};
const UnitDef kNoiseScale{{{"kW/sqrt(h)", 1.0}, {"J/sqrt(s^3)", 0.06}, {"W/sqrt(s)", 0.06}}};
const UnitDef kRate{{{"1/h", 1.0}, {"1/s", 3600.0}}};
const UnitDef kConductance{{{"kW/K", 1.0}, {"W/K", 1e-3}, {"J/(K s)", 1e-3}}};
const UnitDef kTime{{{"h", 1.0}, {"s", 1.0 / 3600.0}}};
const UnitDef kFuelPrice{{{"EUR/l", 1.0}}};
const UnitDef kFuelRate{{{"l/h", 1.0}}};
// Table 1 labels the heat-pump price per kelvin; it is charged per period hour.
const UnitDef kHpPrice{{{"EUR/(K h)", 1.0}, {"EUR/K", 1.0}}};
const UnitDef kHourly{{{"EUR/h", 1.0}}};
const UnitDef kEnergyPrice{{{"EUR/kWh", 1.0}, {"EUR/MWh", 1e-3}}};

struct Parsed {
  std::vector<double> numbers;  // converted to working units
  std::string text;             // raw value text for word fields
};

enum class Kind { Number, Integer, NumberList, IntegerList, Word };

struct Field {
  std::string section;
  std::string key;
  Kind kind;
  const UnitDef* unit;
  std::function<std::string(const Cfg&)> get;                      // canonical value text
  std::function<std::string(Cfg&, const Parsed&)> set;             // returns error text or ""
};

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s;
}

template <class Get>
Field number(std::string sec, std::string key, const UnitDef& unit, Get ref) {
  return {std::move(sec), std::move(key), Kind::Number, &unit,
          [ref](const Cfg& c) { return fmt(ref(const_cast<Cfg&>(c))); },
          [ref](Cfg& c, const Parsed& p) -> std::string {
            if (p.numbers.size() != 1) return "expected one number";
            ref(c) = p.numbers[0];
            return "";
          }};
}

template <class Get>
Field integer(std::string sec, std::string key, Get ref) {
  return {std::move(sec), std::move(key), Kind::Integer, &kNone,
          [ref](const Cfg& c) { return std::to_string(ref(const_cast<Cfg&>(c))); },
          [ref](Cfg& c, const Parsed& p) -> std::string {
            using T = std::remove_reference_t<decltype(ref(c))>;
            T v{};
            const char* last = p.text.data() + p.text.size();
            auto res = std::from_chars(p.text.data(), last, v);
            if (res.ec != std::errc() || res.ptr != last) return "expected one integer";
            ref(c) = v;
            return "";
          }};
}

template <class Get>
Field number_list(std::string sec, std::string key, const UnitDef& unit, Get ref, bool allow_empty) {
  return {std::move(sec), std::move(key), Kind::NumberList, &unit,
          [ref](const Cfg& c) { return fmt_list(ref(const_cast<Cfg&>(c))); },
          [ref, allow_empty](Cfg& c, const Parsed& p) -> std::string {
            if (p.numbers.empty() && !allow_empty) return "expected a comma-separated list of numbers";
            ref(c) = p.numbers;
            return "";
          }};
}

template <class Get>
Field integer_list(std::string sec, std::string key, Get ref) {
  return {std::move(sec), std::move(key), Kind::IntegerList, &kNone,
          [ref](const Cfg& c) {
            std::string s;
            const auto& v = ref(const_cast<Cfg&>(c));
            for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
            return s;
          },
          [ref](Cfg& c, const Parsed& p) -> std::string {
            std::vector<int> out;
            for (double v : p.numbers) {
              if (v != std::floor(v)) return "expected a comma-separated list of integers";
              out.push_back(static_cast<int>(v));
            }
            if (out.empty()) return "expected a comma-separated list of integers";
            ref(c) = out;
            return "";
          }};
}

Field word(std::string sec, std::string key, std::function<std::string(const Cfg&)> get,
           std::function<std::string(Cfg&, const std::string&)> set) {
  return {std::move(sec), std::move(key), Kind::Word, &kNone, std::move(get),
          [set](Cfg& c, const Parsed& p) { return set(c, p.text); }};
}

const char* outlet_name(mor::OutletMode m) { return m == mor::OutletMode::Reconstruct ? "reconstruct" : "projected"; }

const char* method_name(mor::GramianMethod m) {
  switch (m) {
    case mor::GramianMethod::Dense: return "dense";
    case mor::GramianMethod::LowRankAdi: return "adi";
    default: return "auto";
  }
}

std::vector<Field> make_fields() {
  std::vector<Field> f;
  // geometry
  f.push_back(number("geometry", "lx", kLength, [](Cfg& c) -> double& { return c.geometry.lx; }));
  f.push_back(number("geometry", "ly", kLength, [](Cfg& c) -> double& { return c.geometry.ly; }));
  f.push_back(number("geometry", "lz", kLength, [](Cfg& c) -> double& { return c.geometry.lz; }));
  f.push_back(number("geometry", "phx_height", kLength, [](Cfg& c) -> double& { return c.geometry.phx_height; }));
  f.push_back(number("geometry", "phx_center_y", kLength, [](Cfg& c) -> double& { return c.geometry.phx_center_y; }));
  f.push_back(integer("geometry", "n_phx", [](Cfg& c) -> int& { return c.geometry.n_phx; }));
  f.push_back(number("geometry", "hx", kLength, [](Cfg& c) -> double& { return c.hx; }));
  f.push_back(number("geometry", "hy", kLength, [](Cfg& c) -> double& { return c.hy; }));
  // materials
  f.push_back(number("materials", "rho_m", kDensity, [](Cfg& c) -> double& { return c.materials.rho_m; }));
  f.push_back(number("materials", "rho_f", kDensity, [](Cfg& c) -> double& { return c.materials.rho_f; }));
  f.push_back(number("materials", "cp_m", kHeatCapacity, [](Cfg& c) -> double& { return c.materials.cp_m; }));
  f.push_back(number("materials", "cp_f", kHeatCapacity, [](Cfg& c) -> double& { return c.materials.cp_f; }));
  f.push_back(number("materials", "kappa_m", kConductivity, [](Cfg& c) -> double& { return c.materials.kappa_m; }));
  f.push_back(number("materials", "kappa_f", kConductivity, [](Cfg& c) -> double& { return c.materials.kappa_f; }));
  // boundary
  f.push_back(number("boundary", "lambda_g", kTransfer, [](Cfg& c) -> double& { return c.boundary.lambda_g; }));
  f.push_back(number("boundary", "q_in_charge", kTemperature, [](Cfg& c) -> double& { return c.boundary.q_in_charge; }));
  f.push_back(number("boundary", "dt_hp", kTempDiff, [](Cfg& c) -> double& { return c.boundary.dt_hp; }));
  f.push_back(number("boundary", "v_bar", kVelocity, [](Cfg& c) -> double& { return c.boundary.v_bar; }));
  // ground
  f.push_back(number_list("ground", "qg", kTemperature, [](Cfg& c) -> std::vector<double>& { return c.qg; }, false));
  f.push_back(number("ground", "q0", kTemperature, [](Cfg& c) -> double& { return c.q0; }));
  // reduction
  f.push_back(integer("reduction", "ell", [](Cfg& c) -> int& { return c.reduction.ell; }));
  f.push_back(word(
      "reduction", "outlet", [](const Cfg& c) { return std::string(outlet_name(c.reduction.outlet_mode)); },
      [](Cfg& c, const std::string& s) -> std::string {
        if (s == "reconstruct") c.reduction.outlet_mode = mor::OutletMode::Reconstruct;
        else if (s == "projected") c.reduction.outlet_mode = mor::OutletMode::Projected;
        else return "expected reconstruct or projected";
        return "";
      }));
  f.push_back(word(
      "reduction", "gramian_modes",
      [](const Cfg& c) {
        std::string s;
        for (std::size_t i = 0; i < c.reduction.gramian_modes.size(); ++i) {
          s += (i ? ", " : "") + std::string(ges::mode_name(c.reduction.gramian_modes[i]));
        }
        return s;
      },
      [](Cfg& c, const std::string& s) -> std::string {
        std::vector<ges::Mode> modes;
        std::stringstream in(squash(s));
        std::string item;
        while (std::getline(in, item, ',')) {
          bool found = false;
          for (ges::Mode m : {ges::Mode::Charge, ges::Mode::Idle, ges::Mode::Discharge}) {
            if (item == ges::mode_name(m)) {
              modes.push_back(m);
              found = true;
            }
          }
          if (!found) return "unknown mode '" + item + "' (expected charge, idle, discharge)";
        }
        if (modes.empty()) return "expected at least one mode";
        c.reduction.gramian_modes = modes;
        return "";
      }));
  f.push_back(word(
      "reduction", "gramian_method", [](const Cfg& c) { return std::string(method_name(c.reduction.method)); },
      [](Cfg& c, const std::string& s) -> std::string {
        if (s == "auto") c.reduction.method = mor::GramianMethod::Auto;
        else if (s == "dense") c.reduction.method = mor::GramianMethod::Dense;
        else if (s == "adi") c.reduction.method = mor::GramianMethod::LowRankAdi;
        else return "expected auto, dense or adi";
        return "";
      }));
  // demand and fuel processes
  for (const char* sec : {"demand", "fuel"}) {
    const bool dem = std::string(sec) == "demand";
    const UnitDef& level = dem ? kPower : kFuelPrice;
    auto proc = [dem](Cfg& c) -> ProcessConfig& { return dem ? c.demand : c.fuel; };
    f.push_back(number(sec, "mu0", level, [proc](Cfg& c) -> double& { return proc(c).mu0; }));
    f.push_back(number_list(sec, "season_amplitude", level,
                            [proc](Cfg& c) -> std::vector<double>& { return proc(c).amplitude; }, true));
    f.push_back(number_list(sec, "season_period", kTime,
                            [proc](Cfg& c) -> std::vector<double>& { return proc(c).period_h; }, true));
    f.push_back(number_list(sec, "season_shift", kTime,
                            [proc](Cfg& c) -> std::vector<double>& { return proc(c).shift_h; }, true));
    f.push_back(number(sec, "beta", kRate, [proc](Cfg& c) -> double& { return proc(c).beta; }));
    // The fuel noise scale is in EUR/(l sqrt(h)); only the demand scale has conversions.
    static const UnitDef kFuelNoise{{{"EUR/(l sqrt(h))", 1.0}}};
    f.push_back(number_list(sec, "sigma", dem ? kNoiseScale : kFuelNoise,
                            [proc](Cfg& c) -> std::vector<double>& { return proc(c).sigma; }, false));
    f.push_back(number(sec, "x0", level, [proc](Cfg& c) -> double& { return proc(c).x0; }));
  }
  // ies
  f.push_back(number("ies", "p_in", kTemperature, [](Cfg& c) -> double& { return c.ies.p_in; }));
  f.push_back(number("ies", "p_out", kTemperature, [](Cfg& c) -> double& { return c.ies.p_out; }));
  f.push_back(number_list("ies", "p_amb", kTemperature, [](Cfg& c) -> std::vector<double>& { return c.ies.p_amb; }, false));
  f.push_back(number("ies", "gamma", kRate, [](Cfg& c) -> double& { return c.ies.gamma; }));
  f.push_back(number("ies", "m_p", kMass, [](Cfg& c) -> double& { return c.ies.m_p; }));
  f.push_back(number("ies", "cp_w", kHeatCapacity, [](Cfg& c) -> double& { return c.ies.cp_w; }));
  f.push_back(number("ies", "kappa_p", kTransfer, [](Cfg& c) -> double& { return c.ies.kappa_p; }));
  f.push_back(number("ies", "a_p", kArea, [](Cfg& c) -> double& { return c.ies.a_p; }));
  f.push_back(number("ies", "l_c", kConductance, [](Cfg& c) -> double& { return c.ies.l_c; }));
  f.push_back(number("ies", "l_d", kConductance, [](Cfg& c) -> double& { return c.ies.l_d; }));
  f.push_back(number("ies", "l_f", kPower, [](Cfg& c) -> double& { return c.ies.l_f; }));
  // constraints
  f.push_back(number("constraints", "p_lo", kTemperature, [](Cfg& c) -> double& { return c.constraints.p_lo; }));
  f.push_back(number("constraints", "p_hi", kTemperature, [](Cfg& c) -> double& { return c.constraints.p_hi; }));
  f.push_back(number("constraints", "q_lo", kTemperature, [](Cfg& c) -> double& { return c.constraints.q_lo; }));
  f.push_back(number("constraints", "q_hi", kTemperature, [](Cfg& c) -> double& { return c.constraints.q_hi; }));
  f.push_back(number("constraints", "r_lo", kPower, [](Cfg& c) -> double& { return c.constraints.r_lo; }));
  f.push_back(number("constraints", "r_hi", kPower, [](Cfg& c) -> double& { return c.constraints.r_hi; }));
  f.push_back(number("constraints", "epsilon", kNone, [](Cfg& c) -> double& { return c.constraints.epsilon; }));
  f.push_back(word(
      "constraints", "overspill",
      [](const Cfg& c) { return std::string(c.gate == mdp::OverspillGate::Gated ? "gated" : "strict"); },
      [](Cfg& c, const std::string& s) -> std::string {
        if (s == "gated") c.gate = mdp::OverspillGate::Gated;
        else if (s == "strict") c.gate = mdp::OverspillGate::Strict;
        else return "expected gated or strict";
        return "";
      }));
  // costs
  f.push_back(number("costs", "xi_f", kFuelRate, [](Cfg& c) -> double& { return c.costs.xi_f; }));
  f.push_back(number("costs", "xi_hp", kHpPrice, [](Cfg& c) -> double& { return c.costs.xi_hp; }));
  f.push_back(number("costs", "xi_p", kHourly, [](Cfg& c) -> double& { return c.costs.xi_p; }));
  f.push_back(number("costs", "xi_pen_p", kEnergyPrice, [](Cfg& c) -> double& { return c.costs.xi_pen_p; }));
  f.push_back(number("costs", "xi_pen_q", kEnergyPrice, [](Cfg& c) -> double& { return c.costs.xi_pen_q; }));
  f.push_back(number("costs", "xi_liq_p", kEnergyPrice, [](Cfg& c) -> double& { return c.costs.xi_liq_p; }));
  f.push_back(number("costs", "xi_liq_q", kEnergyPrice, [](Cfg& c) -> double& { return c.costs.xi_liq_q; }));
  f.push_back(number("costs", "p_ref", kTemperature, [](Cfg& c) -> double& { return c.costs.p_ref; }));
  f.push_back(number("costs", "q_ref", kTemperature, [](Cfg& c) -> double& { return c.costs.q_ref; }));
  f.push_back(number("costs", "m_q", kMass, [](Cfg& c) -> double& { return c.costs.m_q; }));
  f.push_back(number("costs", "delta", kRate, [](Cfg& c) -> double& { return c.costs.delta; }));
  // time
  f.push_back(number("time", "horizon", kTime, [](Cfg& c) -> double& { return c.horizon_h; }));
  f.push_back(integer("time", "periods", [](Cfg& c) -> int& { return c.periods; }));
  // grid
  f.push_back(integer("grid", "n_r", [](Cfg& c) -> int& { return c.grid.counts.r; }));
  f.push_back(integer("grid", "n_p", [](Cfg& c) -> int& { return c.grid.counts.p; }));
  f.push_back(integer_list("grid", "n_y", [](Cfg& c) -> std::vector<int>& { return c.grid.counts.y; }));
  f.push_back(number("grid", "pad", kNone, [](Cfg& c) -> double& { return c.grid.pad; }));
  f.push_back(integer("grid", "envelope_periods", [](Cfg& c) -> int& { return c.grid.envelope_periods; }));
  f.push_back(integer("grid", "envelope_seed", [](Cfg& c) -> std::uint64_t& { return c.grid.envelope_seed; }));
  // kernel
  f.push_back(number("kernel", "psi_quantum", kTempDiff, [](Cfg& c) -> double& { return c.psi_quantum; }));
  // simulation
  f.push_back(integer("simulation", "n_paths", [](Cfg& c) -> int& { return c.simulation.n_paths; }));
  f.push_back(integer("simulation", "seed", [](Cfg& c) -> std::uint64_t& { return c.simulation.seed; }));
  f.push_back(number("simulation", "r0", kPower, [](Cfg& c) -> double& { return c.simulation.r0; }));
  f.push_back(number("simulation", "p0", kTemperature, [](Cfg& c) -> double& { return c.simulation.p0; }));
  f.push_back(number("simulation", "qm0", kTemperature, [](Cfg& c) -> double& { return c.simulation.qm0; }));
  return f;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = make_fields();
  return table;
}

const std::vector<std::string> kSectionOrder{"geometry", "materials", "boundary", "ground", "reduction",
                                             "demand",   "fuel",      "ies",      "constraints", "costs",
                                             "time",     "grid",      "kernel",   "simulation"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last && std::isfinite(out);
}

// Splits "1, 2, 3 unit words" into numbers and the unit text.
bool split_numbers(const std::string& value, std::vector<double>& numbers, std::string& unit) {
  std::istringstream in(value);
  std::vector<std::string> tokens;
  for (std::string t; in >> t;) tokens.push_back(t);
  std::size_t i = 0;
  std::string joined;
  for (; i < tokens.size(); ++i) {
    std::string t = tokens[i];
    std::stringstream parts(t);
    bool all_numeric = true;
    std::vector<double> got;
    for (std::string item; std::getline(parts, item, ',');) {
      if (item.empty()) continue;
      double v = 0.0;
      if (!parse_number(item, v)) {
        all_numeric = false;
        break;
      }
      got.push_back(v);
    }
    if (!all_numeric || (got.empty() && t != ",")) break;
    numbers.insert(numbers.end(), got.begin(), got.end());
  }
  for (; i < tokens.size(); ++i) unit += (unit.empty() ? "" : " ") + tokens[i];
  return true;
}

}  // namespace

ExperimentConfig paper_defaults() {
  ExperimentConfig c;
  c.demand.mu0 = -4.64;
  c.demand.beta = 0.5;
  c.demand.sigma = {232.5 * 0.06};
  c.fuel.mu0 = 2.25;
  c.fuel.beta = 0.5;
  c.fuel.sigma = {0.0};
  return c;
}

LoadResult parse_config(const std::string& text) {
  LoadResult result;
  result.config = paper_defaults();
  std::map<std::string, const Field*> by_name;
  for (const Field& f : fields()) by_name[f.section + "." + f.key] = &f;
  std::set<std::string> seen;

  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') {
        result.violations.push_back(where + ": malformed section header '" + line + "'");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      if (std::find(kSectionOrder.begin(), kSectionOrder.end(), section) == kSectionOrder.end()) {
        result.violations.push_back(where + ": unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      result.violations.push_back(where + ": expected 'key = value [unit]'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string path = section + "." + key;
    auto it = by_name.find(path);
    if (it == by_name.end()) {
      result.violations.push_back(path + " (" + where + "): unknown field");
      continue;
    }
    if (!seen.insert(path).second) {
      result.violations.push_back(path + " (" + where + "): given twice");
      continue;
    }
    const Field& field = *it->second;
    Parsed parsed;
    parsed.text = value;
    if (field.kind != Kind::Word) {
      std::string unit;
      split_numbers(value, parsed.numbers, unit);
      const std::string given = squash(unit);
      double factor = 0.0;
      bool matched = false;
      for (const auto& [spelling, k] : field.unit->spellings) {
        if (squash(spelling) == given) {
          factor = k;
          matched = true;
        }
      }
      if (!matched) {
        std::string accepted;
        for (const auto& [spelling, k] : field.unit->spellings) {
          accepted += (accepted.empty() ? "" : ", ") + (spelling.empty() ? std::string("no unit") : spelling);
        }
        result.violations.push_back(path + ": unit '" + unit + "' not accepted (expected " + accepted + ")");
        continue;
      }
      for (double& v : parsed.numbers) v *= factor;
    }
    const std::string err = field.set(result.config, parsed);
    if (!err.empty()) result.violations.push_back(path + ": " + err + ", got '" + value + "'");
  }
  if (result.violations.empty()) {
    for (std::string& v : validate(result.config)) result.violations.push_back(std::move(v));
  }
  const double g_phys = result.config.ies.gamma_physical();
  if (std::abs(g_phys - result.config.ies.gamma) > 0.01 * result.config.ies.gamma) {
    std::ostringstream w;
    w << "ies.gamma = " << result.config.ies.gamma << " 1/h differs from kappa_p * a_p / (m_p * cp_w) = " << g_phys
      << " 1/h; the given gamma is used";
    result.warnings.push_back(w.str());
  }
  return result;
}

LoadResult read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    LoadResult r;
    r.violations.push_back(path + ": cannot open");
    return r;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

ExperimentConfig load_config(const std::string& path) {
  LoadResult r = read_config(path);
  if (!r.ok()) {
    std::string msg = path + ": " + std::to_string(r.violations.size()) + " violation(s)";
    for (const std::string& v : r.violations) msg += "\n  " + v;
    throw ConfigError(msg);
  }
  return r.config;
}

std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> v;
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) v.push_back(msg);
  };
  need(c.geometry.lx > 0 && c.geometry.ly > 0 && c.geometry.lz > 0, "geometry.lx/ly/lz: must be positive");
  need(c.geometry.phx_height > 0 && c.geometry.phx_height < c.geometry.ly, "geometry.phx_height: must lie in (0, ly)");
  need(c.geometry.n_phx == 1, "geometry.n_phx: only a single channel is supported");
  need(c.hx > 0 && c.hy > 0, "geometry.hx/hy: must be positive");
  need(c.materials.rho_m > 0 && c.materials.rho_f > 0 && c.materials.cp_m > 0 && c.materials.cp_f > 0 &&
           c.materials.kappa_m > 0 && c.materials.kappa_f > 0,
       "materials: densities, heat capacities and conductivities must be positive");
  need(c.boundary.lambda_g >= 0, "boundary.lambda_g: must be nonnegative");
  need(c.boundary.v_bar > 0, "boundary.v_bar: must be positive");
  need(c.boundary.dt_hp >= 0, "boundary.dt_hp: must be nonnegative");
  need(c.reduction.ell >= 1, "reduction.ell: must be at least 1");
  for (const auto* p : {&c.demand, &c.fuel}) {
    const std::string sec = p == &c.demand ? "demand" : "fuel";
    need(p->beta > 0, sec + ".beta: must be positive");
    need(std::all_of(p->sigma.begin(), p->sigma.end(), [](double s) { return s >= 0; }),
         sec + ".sigma: must be nonnegative");
    need(p->amplitude.size() == p->period_h.size() && p->amplitude.size() == p->shift_h.size(),
         sec + ".season_amplitude/season_period/season_shift: lists must have equal length");
    need(std::all_of(p->period_h.begin(), p->period_h.end(), [](double s) { return s > 0; }),
         sec + ".season_period: must be positive");
  }
  need(c.ies.p_in > c.ies.p_out, "ies.p_in and ies.p_out: the supply temperature must exceed the return temperature");
  need(c.ies.gamma > 0, "ies.gamma: must be positive");
  need(c.ies.m_p > 0 && c.ies.cp_w > 0, "ies.m_p/cp_w: must be positive");
  need(c.ies.l_c >= 0 && c.ies.l_d >= 0 && c.ies.l_f >= 0, "ies.l_c/l_d/l_f: must be nonnegative");
  need(std::abs(c.demand.beta - c.ies.gamma) > 1e-8,
       "demand.beta and ies.gamma: must differ (the demand and IES rates coincide, the transition is singular)");
  need(c.constraints.p_lo < c.constraints.p_hi, "constraints.p_lo/p_hi: need p_lo < p_hi");
  need(c.constraints.q_lo < c.constraints.q_hi, "constraints.q_lo/q_hi: need q_lo < q_hi");
  need(c.constraints.r_lo < c.constraints.r_hi, "constraints.r_lo/r_hi: need r_lo < r_hi");
  need(c.constraints.epsilon > 0 && c.constraints.epsilon < 1, "constraints.epsilon: must lie in (0, 1)");
  for (double q : c.qg) {
    need(q >= c.constraints.q_lo && q <= c.constraints.q_hi,
         "ground.qg: ground temperature " + fmt(q) + " must lie in [constraints.q_lo, constraints.q_hi] = [" +
             fmt(c.constraints.q_lo) + ", " + fmt(c.constraints.q_hi) + "]");
  }
  need(c.costs.m_q > 0, "costs.m_q: must be positive");
  need(c.costs.delta >= 0, "costs.delta: must be nonnegative");
  need(c.periods >= 0, "time.periods: must be nonnegative");
  need(c.horizon_h > 0, "time.horizon: must be positive");
  need(c.grid.counts.r >= 0 && c.grid.counts.p >= 0 &&
           std::all_of(c.grid.counts.y.begin(), c.grid.counts.y.end(), [](int k) { return k >= 0; }),
       "grid.n_r/n_p/n_y: interval counts must be nonnegative");
  need(static_cast<int>(c.grid.counts.y.size()) == c.reduction.ell,
       "grid.n_y: needs one count per reduced coordinate (reduction.ell = " + std::to_string(c.reduction.ell) + ")");
  need(c.grid.pad >= 0, "grid.pad: must be nonnegative");
  need(c.grid.envelope_periods >= 1, "grid.envelope_periods: must be positive");
  need(c.psi_quantum >= 0, "kernel.psi_quantum: must be nonnegative");
  need(c.simulation.n_paths >= 1, "simulation.n_paths: must be positive");
  return v;
}

std::string dump_sections(const ExperimentConfig& cfg, const std::vector<std::string>& sections) {
  std::ostringstream out;
  bool first = true;
  for (const std::string& sec : kSectionOrder) {
    if (std::find(sections.begin(), sections.end(), sec) == sections.end()) continue;
    out << (first ? "" : "\n") << '[' << sec << "]\n";
    first = false;
    for (const Field& f : fields()) {
      if (f.section != sec) continue;
      out << f.key << " = " << f.get(cfg);
      if (!f.unit->canonical().empty()) out << ' ' << f.unit->canonical();
      out << '\n';
    }
  }
  return out.str();
}

std::string dump(const ExperimentConfig& cfg) { return dump_sections(cfg, kSectionOrder); }

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Assemble: return "assemble";
    case Stage::Reduce: return "reduce";
    case Stage::Kernel: return "kernel";
    case Stage::Solve: return "solve";
    case Stage::Simulate: return "simulate";
    case Stage::Validate: return "validate";
  }
  return "?";
}

std::vector<std::string> stage_sections(Stage s) {
  switch (s) {
    case Stage::Assemble: return {"geometry", "materials", "boundary"};
    case Stage::Reduce: return {"reduction"};
    case Stage::Kernel: return {"ground", "demand", "ies", "constraints", "time", "grid", "kernel"};
    case Stage::Solve: return {"fuel", "costs"};
    case Stage::Simulate: return {"simulation"};
    case Stage::Validate: return {};
  }
  return {};
}

processes::Seasonality seasonality(const ProcessConfig& p) {
  processes::Seasonality s;
  s.mu0 = p.mu0;
  for (std::size_t i = 0; i < p.amplitude.size(); ++i) s.components.push_back({p.amplitude[i], p.period_h[i], p.shift_h[i]});
  return s;
}

processes::OUParams ou_params(const ProcessConfig& p) {
  processes::OUParams o;
  o.beta = p.beta;
  o.sigma = p.sigma;
  o.x0 = p.x0;
  return o;
}

mor::BtOptions bt_options(const ExperimentConfig& cfg) {
  mor::BtOptions o;
  o.retain_outlet = cfg.reduction.outlet_mode == mor::OutletMode::Projected;
  o.method = cfg.reduction.method;
  o.gramian_modes = cfg.reduction.gramian_modes;
  return o;
}

mdp::MdpModel build_model(const ExperimentConfig& cfg, const mor::GesDynamics& ges) {
  mdp::MdpModel m;
  m.ges = ges;
  m.demand = ou_params(cfg.demand);
  m.demand_season = seasonality(cfg.demand);
  m.fuel = ou_params(cfg.fuel);
  m.fuel_season = seasonality(cfg.fuel);
  m.ies = cfg.ies;
  m.cons = cfg.constraints;
  m.costs = cfg.costs;
  m.costs.cp_m = cfg.materials.cp_m;
  m.costs.m_p = cfg.ies.m_p;
  m.costs.cp_w = cfg.ies.cp_w;
  m.qg = cfg.qg;
  m.horizon = cfg.periods;
  m.dt = cfg.dt();
  m.gate = cfg.gate;
  return m;
}

mdp::State start_state(const ExperimentConfig& cfg, const mor::GesDynamics& ges) {
  mdp::State x;
  x.r = cfg.simulation.r0;
  x.f = 0.0;
  x.p = cfg.simulation.p0;
  x.y = mdp::storage_state(ges, cfg.simulation.qm0);
  return x;
}

}  // namespace geostore::config
