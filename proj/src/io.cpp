#include "tegr/io.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#ifndef TEGR_DATA_DIR
#define TEGR_DATA_DIR "data"
#endif

namespace tegr {

namespace {

// ---------------------------------------------------------------- locations

std::string where(const YAML::Node& n)
{
  const YAML::Mark m = n.Mark();
  if (m.is_null()) return "config";
  return "line " + std::to_string(m.line + 1) + ", column " + std::to_string(m.column + 1);
}

[[noreturn]] void fail(const YAML::Node& n, const std::string& msg) { throw ConfigError(where(n) + ": " + msg); }

void check_keys(const YAML::Node& map, const std::string& section, const std::set<std::string>& allowed)
{
  if (!map.IsMap()) fail(map, "'" + section + "' must be a mapping");
  for (const auto& kv : map)
  {
    const std::string key = kv.first.as<std::string>();
    if (!allowed.count(key)) fail(kv.first, "unknown key '" + key + "' in " + section);
  }
}

YAML::Node require(const YAML::Node& map, const std::string& key, const std::string& section)
{
  const YAML::Node n = map[key];
  if (!n) fail(map, "missing mandatory field '" + key + "' in " + section);
  return n;
}

// -------------------------------------------------------------------- units

enum class Unit
{
  kNone,
  kStress,
  kDays,
  kLength,
  kDensity,
  kMassPerCell,
  kVolumePerCellDay,
  kEnergyPerMass,
  kCellDensity,
  kDegrees,
};

std::string normalize_unit(std::string u)
{
  auto replace = [&](const std::string& from, const std::string& to) {
    for (std::size_t pos = 0; (pos = u.find(from, pos)) != std::string::npos; pos += to.size())
      u.replace(pos, from.size(), to);
  };
  replace("\xC2\xB5", "u");  // micro sign
  replace("\xCE\xBC", "u");  // Greek mu
  replace("\xC2\xB2", "2");
  replace("\xC2\xB3", "3");
  replace("^", "");
  replace("cells", "cell");
  replace("days", "d");
  replace("day", "d");
  return u;
}

/// Accepted normalized spellings; the first is the canonical output form.
std::vector<std::string> accepted(Unit u, UnitSystem sys)
{
  switch (u)
  {
    case Unit::kNone: return {""};
    case Unit::kStress:
      return sys == UnitSystem::kMPa ? std::vector<std::string>{"MPa", "N/mm2"}
                                     : std::vector<std::string>{"uN/mm2", "kPa"};
    case Unit::kDays: return {"d"};
    case Unit::kLength: return {"mm"};
    case Unit::kDensity: return {"ug/mm3"};
    case Unit::kMassPerCell: return {"ug/cell"};
    case Unit::kVolumePerCellDay: return {"mm3/cell/d"};
    case Unit::kEnergyPerMass: return {"J/ug"};
    case Unit::kCellDensity: return {"cell/mm3"};
    case Unit::kDegrees: return {"deg"};
  }
  return {""};
}

double parse_number(const YAML::Node& n, const std::string& text)
{
  double v = 0.0;
  const char* b = text.data();
  const char* e = b + text.size();
  if (!text.empty() && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) fail(n, "expected a number, got '" + text + "'");
  return v;
}

double quantity(const YAML::Node& n, Unit unit, UnitSystem sys)
{
  if (!n.IsScalar()) fail(n, "expected a scalar quantity");
  const std::string s = n.Scalar();
  const auto first_space = s.find_first_of(" \t");
  const std::string num = s.substr(0, first_space);
  std::string tag;
  if (first_space != std::string::npos)
  {
    const auto start = s.find_first_not_of(" \t", first_space);
    if (start != std::string::npos) tag = s.substr(start);
  }
  const double v = parse_number(n, num);
  const auto ok = accepted(unit, sys);
  const std::string norm = normalize_unit(tag);
  if (unit == Unit::kNone)
  {
    if (!tag.empty()) fail(n, "unit mismatch: dimensionless value carries unit '" + tag + "'");
    return v;
  }
  if (tag.empty()) fail(n, "unit missing: expected '" + ok.front() + "'");
  if (std::find(ok.begin(), ok.end(), norm) == ok.end())
    fail(n, "unit mismatch: expected '" + ok.front() + "', got '" + tag + "'");
  return v;
}

std::vector<double> quantity_list(const YAML::Node& n, Unit unit, UnitSystem sys)
{
  if (!n.IsSequence()) fail(n, "expected a list");
  std::vector<double> out;
  for (const auto& item : n) out.push_back(quantity(item, unit, sys));
  return out;
}

int positive_int(const YAML::Node& n)
{
  if (!n.IsScalar()) fail(n, "expected an integer");
  const std::string s = n.Scalar();
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) fail(n, "expected an integer, got '" + s + "'");
  if (v < 1) fail(n, "divisions must be >= 1");
  return v;
}

std::string text(const YAML::Node& n)
{
  if (!n.IsScalar()) fail(n, "expected a string");
  return n.Scalar();
}

// --------------------------------------------------------------- parameters

struct ParamField
{
  const char* key;
  double MaterialParams::*member;
  Unit unit;
};

const std::vector<ParamField>& param_fields()
{
  static const std::vector<ParamField> f{
      {"lambda", &MaterialParams::lambda, Unit::kStress},
      {"mu", &MaterialParams::mu, Unit::kStress},
      {"k1", &MaterialParams::k1, Unit::kStress},
      {"k2", &MaterialParams::k2, Unit::kNone},
      {"kappa", &MaterialParams::kappa, Unit::kNone},
      {"sigma_g0", &MaterialParams::sigma_g0, Unit::kStress},
      {"r1", &MaterialParams::r1, Unit::kNone},
      {"beta_g", &MaterialParams::beta_g, Unit::kStress},
      {"eta_g", &MaterialParams::eta_g, Unit::kDays},
      {"eta_s", &MaterialParams::eta_s, Unit::kDays},
      {"v_g", &MaterialParams::v_g, Unit::kNone},
      {"a1", &MaterialParams::a1, Unit::kMassPerCell},
      {"tau", &MaterialParams::tau, Unit::kDays},
      {"h", &MaterialParams::h, Unit::kNone},
      {"a2", &MaterialParams::a2, Unit::kVolumePerCellDay},
      {"psi_crit", &MaterialParams::psi_crit, Unit::kEnergyPerMass},
      {"rho_th", &MaterialParams::rho_th, Unit::kDensity},
      {"rho_co_f", &MaterialParams::rho_co_f, Unit::kDensity},
      {"c_cell", &MaterialParams::c_cell, Unit::kCellDensity},
      {"energy_per_mass_scale", &MaterialParams::energy_per_mass_scale, Unit::kNone},
  };
  return f;
}

MaterialParams parse_params(const YAML::Node& n, UnitSystem sys)
{
  std::set<std::string> allowed{"preset", "pi_contraction"};
  for (const auto& f : param_fields()) allowed.insert(f.key);
  check_keys(n, "params", allowed);

  MaterialParams p;
  if (n["preset"])
  {
    const std::string preset = text(n["preset"]);
    if (preset == "strip")
      p = MaterialParams::strip();
    else if (preset == "cruciform")
      p = MaterialParams::cruciform();
    else
      fail(n["preset"], "unknown preset '" + preset + "' (expected strip or cruciform)");
  }
  else
  {
    for (const auto& f : param_fields())
      if (f.member != &MaterialParams::energy_per_mass_scale) require(n, f.key, "params");
  }
  for (const auto& f : param_fields())
    if (n[f.key]) p.*(f.member) = quantity(n[f.key], f.unit, sys);
  if (n["pi_contraction"])
  {
    const std::string s = text(n["pi_contraction"]);
    if (s == "dyadic")
      p.pi_contraction = PiContraction::kDyadic;
    else if (s == "sandwich")
      p.pi_contraction = PiContraction::kSandwich;
    else
      fail(n["pi_contraction"], "pi_contraction must be dyadic or sandwich");
  }

  try
  {
    p.validate();
  }
  catch (const std::invalid_argument& e)
  {
    // Messages read "MaterialParams: <field> ..."; point at that field.
    std::string msg = e.what();
    const std::string body = msg.substr(msg.find(':') + 2);
    const std::string field = body.substr(0, body.find(' '));
    const YAML::Node at = n[field] ? n[field] : n;
    fail(at, "out of range: " + body);
  }
  return p;
}

Ten2 parse_F(const YAML::Node& n)
{
  if (!n.IsSequence() || (n.size() != 3 && n.size() != 9)) fail(n, "F must list 3 (diagonal) or 9 components");
  Ten2 F = Ten2::Identity();
  if (n.size() == 3)
    for (int i = 0; i < 3; ++i) F(i, i) = quantity(n[i], Unit::kNone, UnitSystem::kMPa);
  else
    for (int k = 0; k < 9; ++k) F(k / 3, k % 3) = quantity(n[k], Unit::kNone, UnitSystem::kMPa);
  if (!(F.determinant() > 0.0)) fail(n, "det F must be positive");
  return F;
}

std::pair<int, int> parse_plane(const YAML::Node& n)
{
  const std::string s = text(n);
  auto axis = [&](char c) {
    if (c < 'x' || c > 'z') fail(n, "plane must be two of x, y, z (e.g. xy)");
    return c - 'x';
  };
  if (s.size() != 2 || s[0] == s[1]) fail(n, "plane must be two distinct axes (e.g. xy)");
  return {axis(s[0]), axis(s[1])};
}

}  // namespace

// ------------------------------------------------------------------- config

std::string to_string(Scenario s)
{
  switch (s)
  {
    case Scenario::kStrip: return "strip";
    case Scenario::kCruciform: return "cruciform";
    case Scenario::kMaterialPoint: return "material_point";
  }
  return "";
}

std::string to_string(UnitSystem u) { return u == UnitSystem::kMPa ? "MPa" : "uN/mm2"; }

void SimulationConfig::validate() const
{
  auto bad = [](const std::string& m) { throw ConfigError(m); };
  if (stepping.horizon < 0.0) bad("stepping: horizon must be >= 0");
  if (!(stepping.dt_base > 0.0)) bad("stepping: dt_base must be positive");
  if (stepping.dt_max < stepping.dt_base) bad("stepping: dt_max must be >= dt_base");
  for (double t : outputs.snapshot_times)
    if (t < 0.0 || t > stepping.horizon + 1e-12) bad("outputs: snapshot time " + format_number(t, 9) + " outside [0, horizon]");
  for (double t : stepping.event_times)
    if (t < 0.0) bad("stepping: event times must be >= 0");
  if (threads < 1) bad("threads must be >= 1");
  if (perturbation)
  {
    if (scenario != Scenario::kCruciform) bad("perturbation: only the cruciform scenario supports it");
    if (!(perturbation->duration > 0.0)) bad("perturbation: duration must be positive");
  }
  for (std::size_t k = 1; k < program.size(); ++k)
    if (!(program[k].time > program[k - 1].time)) bad("program: knot times must increase");
  try
  {
    params.validate();
  }
  catch (const std::invalid_argument& e)
  {
    bad(e.what());
  }
}

SimulationConfig parse_config(const std::string& src)
{
  YAML::Node root;
  try
  {
    root = YAML::Load(src);
  }
  catch (const YAML::ParserException& e)
  {
    throw ConfigError("line " + std::to_string(e.mark.line + 1) + ", column " + std::to_string(e.mark.column + 1) +
                      ": " + e.msg);
  }
  if (!root || root.IsNull() || (root.IsMap() && !root["scenario"])) throw ConfigError("scenario missing");
  check_keys(root, "document",
             {"scenario", "units", "geometry", "program", "params", "stepping", "fiber_init", "outputs",
              "perturbation", "threads"});

  SimulationConfig c;
  const std::string sc = text(root["scenario"]);
  if (sc == "strip")
    c.scenario = Scenario::kStrip;
  else if (sc == "cruciform")
    c.scenario = Scenario::kCruciform;
  else if (sc == "material_point")
    c.scenario = Scenario::kMaterialPoint;
  else
    fail(root["scenario"], "unknown scenario '" + sc + "' (expected strip, cruciform or material_point)");

  const std::string us = normalize_unit(text(require(root, "units", "document")));
  if (us == "MPa")
    c.units = UnitSystem::kMPa;
  else if (us == "uN/mm2")
    c.units = UnitSystem::kMicroNewtonPerMm2;
  else
    fail(root["units"], "units must be MPa or uN/mm2");
  const UnitSystem sys = c.units;

  if (const YAML::Node g = root["geometry"])
  {
    if (c.scenario == Scenario::kStrip)
    {
      check_keys(g, "geometry", {"length", "width", "thickness", "divisions"});
      if (g["length"]) c.strip.length = quantity(g["length"], Unit::kLength, sys);
      if (g["width"]) c.strip.width = quantity(g["width"], Unit::kLength, sys);
      if (g["thickness"]) c.strip.thickness = quantity(g["thickness"], Unit::kLength, sys);
      if (const YAML::Node d = g["divisions"])
      {
        if (!d.IsSequence() || d.size() != 3) fail(d, "divisions must list nx, ny, nz");
        c.strip.nx = positive_int(d[0]);
        c.strip.ny = positive_int(d[1]);
        c.strip.nz = positive_int(d[2]);
      }
    }
    else if (c.scenario == Scenario::kCruciform)
    {
      check_keys(g, "geometry", {"arm_length", "arm_width", "center_width", "thickness", "divisions"});
      auto& cg = c.cruciform;
      if (g["arm_length"]) cg.arm_length = quantity(g["arm_length"], Unit::kLength, sys);
      if (g["arm_width"]) cg.arm_width = quantity(g["arm_width"], Unit::kLength, sys);
      if (g["center_width"]) cg.center_width = quantity(g["center_width"], Unit::kLength, sys);
      if (g["thickness"]) cg.thickness = quantity(g["thickness"], Unit::kLength, sys);
      if (const YAML::Node d = g["divisions"])
      {
        check_keys(d, "geometry.divisions", {"center", "arm_width", "arm_length", "thickness"});
        if (d["center"]) cg.n_center = positive_int(d["center"]);
        if (d["arm_width"]) cg.n_arm_width = positive_int(d["arm_width"]);
        if (d["arm_length"]) cg.n_arm_length = positive_int(d["arm_length"]);
        if (d["thickness"]) cg.n_thickness = positive_int(d["thickness"]);
      }
    }
    else
    {
      fail(g, "material_point takes no geometry");
    }
  }

  if (const YAML::Node pr = root["program"])
  {
    if (c.scenario != Scenario::kMaterialPoint) fail(pr, "program is only valid for material_point");
    if (!pr.IsSequence()) fail(pr, "program must be a list of {time, F}");
    for (const auto& knot : pr)
    {
      check_keys(knot, "program", {"time", "F"});
      DeformationKnot k;
      k.time = quantity(require(knot, "time", "program"), Unit::kDays, sys);
      k.F = parse_F(require(knot, "F", "program"));
      c.program.push_back(k);
    }
  }

  c.params = parse_params(require(root, "params", "document"), sys);

  if (const YAML::Node s = root["stepping"])
  {
    check_keys(s, "stepping", {"dt_base", "dt_max", "horizon", "event_times"});
    if (s["dt_base"]) c.stepping.dt_base = quantity(s["dt_base"], Unit::kDays, sys);
    c.stepping.dt_max = s["dt_max"] ? quantity(s["dt_max"], Unit::kDays, sys) : c.stepping.dt_base;
    if (s["horizon"]) c.stepping.horizon = quantity(s["horizon"], Unit::kDays, sys);
    if (s["event_times"]) c.stepping.event_times = quantity_list(s["event_times"], Unit::kDays, sys);
    if (c.stepping.horizon < 0.0) fail(s["horizon"], "horizon must be >= 0");
    if (!(c.stepping.dt_base > 0.0)) fail(s["dt_base"], "dt_base must be positive");
  }

  if (const YAML::Node f = root["fiber_init"])
  {
    check_keys(f, "fiber_init", {"mode", "seed", "plane", "angle"});
    const std::string mode = text(require(f, "mode", "fiber_init"));
    if (mode == "in_plane_uniform")
    {
      c.fiber.mode = FiberMode::kInPlaneUniform;
      const YAML::Node seed = require(f, "seed", "fiber_init");
      try
      {
        c.fiber.seed = seed.as<std::uint64_t>();
      }
      catch (const YAML::Exception&)
      {
        fail(seed, "seed must be an unsigned 64-bit integer");
      }
    }
    else if (mode == "fixed_angle")
    {
      c.fiber.mode = FiberMode::kFixedAngle;
      c.fiber.angle_deg = quantity(require(f, "angle", "fiber_init"), Unit::kDegrees, sys);
    }
    else
    {
      fail(f["mode"], "mode must be in_plane_uniform or fixed_angle");
    }
    if (f["plane"]) std::tie(c.fiber.axis_a, c.fiber.axis_b) = parse_plane(f["plane"]);
  }
  else if (c.scenario == Scenario::kCruciform)
  {
    c.fiber.axis_a = 0;
    c.fiber.axis_b = 2;
  }

  if (const YAML::Node o = root["outputs"])
  {
    check_keys(o, "outputs", {"snapshot_times", "vtk_dir", "csv_path"});
    if (o["snapshot_times"]) c.outputs.snapshot_times = quantity_list(o["snapshot_times"], Unit::kDays, sys);
    if (o["vtk_dir"]) c.outputs.vtk_dir = text(o["vtk_dir"]);
    if (o["csv_path"]) c.outputs.csv_path = text(o["csv_path"]);
    for (std::size_t k = 0; k < c.outputs.snapshot_times.size(); ++k)
    {
      const double t = c.outputs.snapshot_times[k];
      if (t < 0.0 || t > c.stepping.horizon + 1e-12) fail(o["snapshot_times"][k], "snapshot time outside [0, horizon]");
    }
  }
  else
  {
    auto& st = c.outputs.snapshot_times;
    st.erase(std::remove_if(st.begin(), st.end(), [&](double t) { return t > c.stepping.horizon + 1e-12; }),
             st.end());
  }

  if (const YAML::Node p = root["perturbation"])
  {
    check_keys(p, "perturbation", {"time", "fraction", "duration", "mode"});
    Perturbation pt;
    if (p["time"]) pt.time = quantity(p["time"], Unit::kDays, sys);
    if (p["fraction"]) pt.fraction = quantity(p["fraction"], Unit::kNone, sys);
    if (p["duration"]) pt.duration = quantity(p["duration"], Unit::kDays, sys);
    if (p["mode"])
    {
      const std::string m = text(p["mode"]);
      if (m == "displacement")
        pt.mode = PerturbationMode::kDisplacement;
      else if (m == "load")
        pt.mode = PerturbationMode::kLoad;
      else
        fail(p["mode"], "mode must be displacement or load");
    }
    c.perturbation = pt;
  }

  if (const YAML::Node t = root["threads"]) c.threads = positive_int(t);

  c.validate();
  return c;
}

SimulationConfig load_config(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try
  {
    return parse_config(ss.str());
  }
  catch (const ConfigError& e)
  {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string format_number(double v, int significant)
{
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, significant);
  if (ec != std::errc()) throw std::runtime_error("format_number failed");
  return std::string(buf, ptr);
}

namespace {

/// Shortest decimal that round-trips, for config output.
std::string exact(double v)
{
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

std::string tagged(double v, Unit u, UnitSystem sys)
{
  const std::string tag = accepted(u, sys).front();
  return tag.empty() ? exact(v) : exact(v) + " " + tag;
}

std::string tagged_list(const std::vector<double>& v, Unit u, UnitSystem sys)
{
  std::string s = "[";
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ", " : "") + tagged(v[k], u, sys);
  return s + "]";
}

}  // namespace

std::string serialize_config(const SimulationConfig& c)
{
  const UnitSystem sys = c.units;
  std::ostringstream o;
  o << "scenario: " << to_string(c.scenario) << "\n";
  o << "units: " << to_string(c.units) << "\n";
  if (c.scenario == Scenario::kStrip)
  {
    o << "geometry:\n"
      << "  length: " << tagged(c.strip.length, Unit::kLength, sys) << "\n"
      << "  width: " << tagged(c.strip.width, Unit::kLength, sys) << "\n"
      << "  thickness: " << tagged(c.strip.thickness, Unit::kLength, sys) << "\n"
      << "  divisions: [" << c.strip.nx << ", " << c.strip.ny << ", " << c.strip.nz << "]\n";
  }
  else if (c.scenario == Scenario::kCruciform)
  {
    const auto& g = c.cruciform;
    o << "geometry:\n"
      << "  arm_length: " << tagged(g.arm_length, Unit::kLength, sys) << "\n"
      << "  arm_width: " << tagged(g.arm_width, Unit::kLength, sys) << "\n"
      << "  center_width: " << tagged(g.center_width, Unit::kLength, sys) << "\n"
      << "  thickness: " << tagged(g.thickness, Unit::kLength, sys) << "\n"
      << "  divisions:\n"
      << "    center: " << g.n_center << "\n"
      << "    arm_width: " << g.n_arm_width << "\n"
      << "    arm_length: " << g.n_arm_length << "\n"
      << "    thickness: " << g.n_thickness << "\n";
  }
  else if (!c.program.empty())
  {
    o << "program:\n";
    for (const auto& k : c.program)
    {
      o << "  - time: " << tagged(k.time, Unit::kDays, sys) << "\n    F: [";
      for (int i = 0; i < 9; ++i) o << (i ? ", " : "") << exact(k.F(i / 3, i % 3));
      o << "]\n";
    }
  }
  o << "params:\n";
  for (const auto& f : param_fields()) o << "  " << f.key << ": " << tagged(c.params.*(f.member), f.unit, sys) << "\n";
  o << "  pi_contraction: " << (c.params.pi_contraction == PiContraction::kDyadic ? "dyadic" : "sandwich") << "\n";
  o << "stepping:\n"
    << "  dt_base: " << tagged(c.stepping.dt_base, Unit::kDays, sys) << "\n"
    << "  dt_max: " << tagged(c.stepping.dt_max, Unit::kDays, sys) << "\n"
    << "  horizon: " << tagged(c.stepping.horizon, Unit::kDays, sys) << "\n"
    << "  event_times: " << tagged_list(c.stepping.event_times, Unit::kDays, sys) << "\n";
  const char axes[] = "xyz";
  o << "fiber_init:\n";
  if (c.fiber.mode == FiberMode::kInPlaneUniform)
    o << "  mode: in_plane_uniform\n  seed: " << c.fiber.seed << "\n";
  else
    o << "  mode: fixed_angle\n  angle: " << tagged(c.fiber.angle_deg, Unit::kDegrees, sys) << "\n";
  o << "  plane: " << axes[c.fiber.axis_a] << axes[c.fiber.axis_b] << "\n";
  o << "outputs:\n"
    << "  snapshot_times: " << tagged_list(c.outputs.snapshot_times, Unit::kDays, sys) << "\n"
    << "  vtk_dir: \"" << c.outputs.vtk_dir << "\"\n"
    << "  csv_path: \"" << c.outputs.csv_path << "\"\n";
  if (c.perturbation)
  {
    const auto& p = *c.perturbation;
    o << "perturbation:\n"
      << "  time: " << tagged(p.time, Unit::kDays, sys) << "\n"
      << "  fraction: " << exact(p.fraction) << "\n"
      << "  duration: " << tagged(p.duration, Unit::kDays, sys) << "\n"
      << "  mode: " << (p.mode == PerturbationMode::kDisplacement ? "displacement" : "load") << "\n";
  }
  o << "threads: " << c.threads << "\n";
  return o.str();
}

Ten2 program_F(const std::vector<DeformationKnot>& program, double t)
{
  if (program.empty()) return Ten2::Identity();
  if (t <= program.front().time) return program.front().F;
  if (t >= program.back().time) return program.back().F;
  const auto it = std::upper_bound(program.begin(), program.end(), t,
                                   [](double x, const DeformationKnot& k) { return x < k.time; });
  const DeformationKnot& b = *it;
  const DeformationKnot& a = *(it - 1);
  const double w = (t - a.time) / (b.time - a.time);
  return (1.0 - w) * a.F + w * b.F;
}

// -------------------------------------------------------------------- dataset

namespace {

std::vector<std::string> split_csv(const std::string& line)
{
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double csv_number(const std::string& s, const std::string& ctx)
{
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::runtime_error(ctx + ": bad number '" + s + "'");
  return v;
}

}  // namespace

ExperimentalDataset load_experimental_dataset(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read dataset '" + path.string() + "'");
  ExperimentalDataset out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line))
  {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("day", 0) == 0) continue;  // header
    const auto cells = split_csv(line);
    const std::string ctx = path.string() + ":" + std::to_string(lineno);
    if (cells.size() != 4) throw std::runtime_error(ctx + ": expected day,mean,low,high");
    ExperimentalRow r{csv_number(cells[0], ctx), csv_number(cells[1], ctx), csv_number(cells[2], ctx),
                      csv_number(cells[3], ctx)};
    if (!(r.low <= r.mean && r.mean <= r.high)) throw std::runtime_error(ctx + ": need low <= mean <= high");
    if (!out.empty() && !(r.day > out.back().day)) throw std::runtime_error(ctx + ": days must ascend");
    out.push_back(r);
  }
  return out;
}

std::filesystem::path bundled_dataset_path() { return std::filesystem::path(TEGR_DATA_DIR) / "collagen_density.csv"; }

// ------------------------------------------------------------------------ VTK

void write_vtk_snapshot(const Model& model, const GlobalState& state, const std::filesystem::path& path)
{
  const Mesh& m = model.mesh();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  auto num = [](double v) { return format_number(v, 9); };

  out << "# vtk DataFile Version 3.0\n";
  out << "tegr snapshot t=" << num(state.time) << " days\n";
  out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << m.nodes.size() << " double\n";
  for (const Vec3& x : m.nodes) out << num(x[0]) << ' ' << num(x[1]) << ' ' << num(x[2]) << '\n';
  const std::size_t ne = m.elements.size();
  out << "CELLS " << ne << ' ' << ne * 9 << '\n';
  for (const auto& el : m.elements)
  {
    out << 8;
    for (int n : el) out << ' ' << n;
    out << '\n';
  }
  out << "CELL_TYPES " << ne << '\n';
  for (std::size_t e = 0; e < ne; ++e) out << "12\n";

  out << "POINT_DATA " << m.nodes.size() << '\n';
  out << "VECTORS displacement double\n";
  for (const Vec3& u : state.u) out << num(u[0]) << ' ' << num(u[1]) << ' ' << num(u[2]) << '\n';

  // Cell averages over the 8 QPs.
  const auto stress = model.stresses(state);
  std::vector<double> rho(ne), rho_cur(ne), J(ne);
  std::vector<SymTen2> sigma(ne);
  std::vector<Vec3> fiber(ne);
  std::array<Vec3, 8> X, u;
  for (std::size_t e = 0; e < ne; ++e)
  {
    for (int a = 0; a < 8; ++a)
    {
      X[a] = m.nodes[m.elements[e][a]];
      u[a] = state.u[m.elements[e][a]];
    }
    const auto qps = hex8_quadrature(X, u);
    Vec3 f_sum = Vec3::Zero();
    for (int q = 0; q < kQuadPerElement; ++q)
    {
      const std::size_t g = e * kQuadPerElement + q;
      const double Jq = qps[q].F.determinant();
      rho[e] += state.gp[g].rho_co0 / 8.0;
      rho_cur[e] += state.gp[g].rho_co0 / Jq / 8.0;
      J[e] += Jq / 8.0;
      sigma[e] += (1.0 / 8.0) * cauchy_stress(qps[q].F, stress[g].S);
      // Spatial fiber direction; signs aligned to the first QP before summing.
      Vec3 a = (qps[q].F * stress[g].a_ref).normalized();
      if (q > 0 && a.dot(f_sum) < 0.0) a = -a;
      f_sum += a;
    }
    fiber[e] = f_sum.norm() > 0.0 ? Vec3(f_sum.normalized()) : Vec3::Zero();
  }
  out << "CELL_DATA " << ne << '\n';
  auto scalar = [&](const char* name, const std::vector<double>& v) {
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (double x : v) out << num(x) << '\n';
  };
  scalar("rho_co0", rho);
  scalar("rho_current", rho_cur);
  scalar("J", J);
  const char* comp[] = {"sigma_xx", "sigma_yy", "sigma_zz", "sigma_xy", "sigma_yz", "sigma_xz"};
  for (int k = 0; k < 6; ++k)
  {
    std::vector<double> v(ne);
    for (std::size_t e = 0; e < ne; ++e) v[e] = sigma[e][k];
    scalar(comp[k], v);
  }
  out << "VECTORS fiber double\n";
  for (const Vec3& f : fiber) out << num(f[0]) << ' ' << num(f[1]) << ' ' << num(f[2]) << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

// ------------------------------------------------------------------------ CSV

void write_timeseries_csv(const std::vector<TimeSeriesRow>& rows, const std::filesystem::path& path)
{
  for (std::size_t k = 1; k < rows.size(); ++k)
    if (rows[k].time < rows[k - 1].time) throw std::invalid_argument("time series: time column must not decrease");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << kTimeSeriesHeader << '\n';
  auto num = [](double v) { return format_number(v, 17); };
  auto face = [](const TimeSeriesRow& r, const char* name, int c) {
    const auto it = r.reactions.find(name);
    return it == r.reactions.end() ? 0.0 : it->second[c];
  };
  for (const auto& r : rows)
  {
    out << num(r.time) << ',' << num(face(r, "x_min_face", 0)) << ',' << num(face(r, "x_max_face", 0)) << ','
        << num(face(r, "z_min_face", 2)) << ',' << num(face(r, "z_max_face", 2)) << ',' << num(r.mean_rho_co0)
        << ',' << num(r.mean_J) << ',' << r.newton_iterations << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::vector<TimeSeriesRecord> read_timeseries_csv(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != kTimeSeriesHeader) throw std::runtime_error("unexpected CSV header");
  std::vector<TimeSeriesRecord> out;
  int lineno = 1;
  while (std::getline(in, line))
  {
    ++lineno;
    const auto c = split_csv(line);
    const std::string ctx = path.string() + ":" + std::to_string(lineno);
    if (c.size() != 8) throw std::runtime_error(ctx + ": expected 8 columns");
    TimeSeriesRecord r{};
    r.time_days = csv_number(c[0], ctx);
    r.fx_min = csv_number(c[1], ctx);
    r.fx_max = csv_number(c[2], ctx);
    r.fz_min = csv_number(c[3], ctx);
    r.fz_max = csv_number(c[4], ctx);
    r.mean_rho_co0 = csv_number(c[5], ctx);
    r.mean_J = csv_number(c[6], ctx);
    r.newton_iters = static_cast<int>(csv_number(c[7], ctx));
    out.push_back(r);
  }
  return out;
}

}  // namespace tegr
