#include "hinftune/config.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hinftune/blocks.hpp"
#include "hinftune/diagrams.hpp"

namespace hinftune {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void config_error(const std::string& source, const std::string& path,
                               const std::string& msg) {
  throw Error(ErrorKind::Config,
              source + ": field '" + (path.empty() ? std::string("<root>") : path) + "': " + msg);
}

std::string type_name(const json& j) { return j.type_name(); }

// Object view carrying its field path for diagnostics.
class Obj {
 public:
  Obj(const json& j, std::string path, const std::string& source)
      : j_(j), path_(std::move(path)), source_(source) {
    if (!j_.is_object()) fail("expected an object, got " + type_name(j_));
  }

  [[noreturn]] void fail(const std::string& msg) const { config_error(source_, path_, msg); }
  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    config_error(source_, sub(key), msg);
  }

  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const std::string& path() const { return path_; }
  const std::string& source() const { return source_; }
  const json& raw() const { return j_; }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const json& at(const std::string& key) const {
    if (!has(key)) fail(key, "required field is missing");
    return j_.at(key);
  }

  void allow(std::initializer_list<const char*> keys) const {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!ok.count(it.key())) fail(it.key(), "unknown field");
  }

  double number(const std::string& key) const { return as_number(at(key), sub(key)); }
  double number(const std::string& key, double def) const { return has(key) ? number(key) : def; }
  int integer(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_number_integer()) fail(key, "expected an integer, got " + type_name(v));
    return v.get<int>();
  }
  int integer(const std::string& key, int def) const { return has(key) ? integer(key) : def; }
  std::string string(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_string()) fail(key, "expected a string, got " + type_name(v));
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& def) const {
    return has(key) ? string(key) : def;
  }
  bool boolean(const std::string& key, bool def) const {
    if (!has(key)) return def;
    const json& v = at(key);
    if (!v.is_boolean()) fail(key, "expected true or false, got " + type_name(v));
    return v.get<bool>();
  }
  Obj object(const std::string& key) const { return Obj(at(key), sub(key), source_); }
  const json& array(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_array()) fail(key, "expected an array, got " + type_name(v));
    return v;
  }
  std::vector<double> numbers(const std::string& key) const {
    const json& v = array(key);
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i)
      out.push_back(as_number(v[i], sub(key) + "[" + std::to_string(i) + "]"));
    return out;
  }
  std::pair<double, double> interval(const std::string& key) const {
    const auto v = numbers(key);
    if (v.size() != 2) fail(key, "expected [lower, upper]");
    if (!(v[0] <= v[1])) fail(key, "lower bound exceeds upper bound");
    return {v[0], v[1]};
  }

  double as_number(const json& v, const std::string& path) const {
    if (!v.is_number()) config_error(source_, path, "expected a number, got " + type_name(v));
    const double d = v.get<double>();
    if (!std::isfinite(d)) config_error(source_, path, "number is not finite");
    return d;
  }

 private:
  const json& j_;
  std::string path_;
  const std::string& source_;
};

std::string index_path(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t upto = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < upto; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string what = e.what();
    const auto pos = what.find("syntax error");
    if (pos != std::string::npos) what = what.substr(pos);
    throw Error(ErrorKind::Config,
                source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what);
  }
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

FrequencyGrid parse_grid(const Obj& o) {
  o.allow({"min", "max", "points", "values"});
  std::vector<double> w;
  if (o.has("min") || o.has("max") || o.has("points")) {
    const double lo = o.number("min"), hi = o.number("max");
    const int n = o.integer("points");
    if (!(lo > 0.0 && hi > lo)) o.fail("log-spaced grid needs 0 < min < max");
    if (n < 1) o.fail("points", "must be at least 1");
    w = FrequencyGrid::logspace(lo, hi, n).values();
  }
  if (o.has("values")) {
    for (double v : o.numbers("values")) {
      if (v < 0.0) o.fail("values", "frequencies must be nonnegative");
      w.push_back(v);
    }
  }
  if (w.empty()) o.fail("grid is empty");
  return FrequencyGrid(w);
}

BlockDiagram parse_diagram(const Obj& o) {
  if (o.has("template")) {
    o.allow({"type", "template", "prefix"});
    const std::string name = o.string("template");
    try {
      return diagrams::by_name(name);
    } catch (const Error&) {
      o.fail("template", "unknown template '" + name + "'");
    }
  }
  o.allow({"inputs", "outputs", "blocks", "connections", "prefix", "type"});
  BlockDiagram d;
  auto names = [&](const std::string& key) {
    std::vector<std::string> out;
    const json& a = o.array(key);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_string()) config_error(o.source(), index_path(o.sub(key), i), "expected a string");
      out.push_back(a[i].get<std::string>());
    }
    return out;
  };
  d.inputs = names("inputs");
  d.outputs = names("outputs");
  const json& blocks = o.array("blocks");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const Obj b(blocks[i], index_path(o.sub("blocks"), i), o.source());
    b.allow({"id", "kind", "params", "tunable"});
    const std::string kind_name = b.string("kind");
    const auto kind = block_kind_from_string(kind_name);
    if (!kind) b.fail("kind", "unknown block kind '" + kind_name + "'");
    std::map<std::string, double> params;
    if (b.has("params")) {
      const Obj p = b.object("params");
      for (auto it = p.raw().begin(); it != p.raw().end(); ++it)
        params[it.key()] = p.number(it.key());
    }
    try {
      Block blk(b.string("id"), *kind, params);
      if (b.has("tunable")) {
        const Obj t = b.object("tunable");
        for (auto it = t.raw().begin(); it != t.raw().end(); ++it) {
          const auto [lo, hi] = t.interval(it.key());
          blk.tune(it.key(), lo, hi);
        }
      }
      blk.validate();
      d.blocks.push_back(std::move(blk));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Config) throw;
      b.fail(e.what());
    }
  }
  if (o.has("connections")) {
    const json& conns = o.array("connections");
    for (std::size_t i = 0; i < conns.size(); ++i) {
      const Obj c(conns[i], index_path(o.sub("connections"), i), o.source());
      c.allow({"from", "to", "gain"});
      d.connections.push_back({c.string("from"), c.string("to"), c.number("gain", 1.0)});
    }
  }
  try {
    d.validate();
  } catch (const Error& e) {
    o.fail(e.what());
  }
  return d;
}

// Block-diagonal union of several families; names stay sorted when the
// parts are ordered by prefix.
ParamSystem append_families(const std::vector<ParamSystem>& parts) {
  std::vector<std::string> names;
  std::vector<double> lo, hi;
  std::vector<Eigen::Index> offset;
  for (const auto& p : parts) {
    offset.push_back(static_cast<Eigen::Index>(names.size()));
    names.insert(names.end(), p.names().begin(), p.names().end());
    lo.insert(lo.end(), p.lower().data(), p.lower().data() + p.size());
    hi.insert(hi.end(), p.upper().data(), p.upper().data() + p.size());
  }
  Vector l = Eigen::Map<Vector>(lo.data(), static_cast<Eigen::Index>(lo.size()));
  Vector h = Eigen::Map<Vector>(hi.data(), static_cast<Eigen::Index>(hi.size()));
  return ParamSystem(names, l, h, [parts, offset](const Vector& k) {
    std::vector<StateSpace> ss;
    Eigen::Index n = 0, m = 0, p = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      ss.push_back(parts[i](k.segment(offset[i], parts[i].size())));
      n += ss.back().states();
      m += ss.back().inputs();
      p += ss.back().outputs();
    }
    Matrix a = Matrix::Zero(n, n), b = Matrix::Zero(n, m), c = Matrix::Zero(p, n),
           d = Matrix::Zero(p, m);
    Eigen::Index xn = 0, xm = 0, xp = 0;
    for (const auto& s : ss) {
      a.block(xn, xn, s.states(), s.states()) = s.a();
      b.block(xn, xm, s.states(), s.inputs()) = s.b();
      c.block(xp, xn, s.outputs(), s.states()) = s.c();
      d.block(xp, xm, s.outputs(), s.inputs()) = s.d();
      xn += s.states();
      xm += s.inputs();
      xp += s.outputs();
    }
    return StateSpace(a, b, c, d);
  });
}

struct PartialScenario {
  Scenario scen;
  Vector nominal;
  std::shared_ptr<const CoupledSystem> coupled;
  bool power_outputs = false;
  std::string path;
};

PartialScenario parse_transfer_matrix(const Obj& m) {
  m.allow({"type", "rows", "cols", "entries", "input_names", "output_names"});
  const int rows = m.integer("rows"), cols = m.integer("cols");
  if (rows < 1 || cols < 1) m.fail("rows and cols must be positive");
  std::vector<RationalEntry> entries;
  const json& e = m.array("entries");
  for (std::size_t i = 0; i < e.size(); ++i) {
    const Obj o(e[i], index_path(m.sub("entries"), i), m.source());
    o.allow({"row", "col", "num", "den"});
    entries.push_back({o.integer("row"), o.integer("col"), o.numbers("num"), o.numbers("den")});
  }
  StateSpace ss;
  try {
    ss = realize_transfer_matrix(rows, cols, entries);
  } catch (const Error& err) {
    m.fail("entries", err.what());
  }
  PartialScenario p;
  p.scen.system = ParamSystem({}, Vector(0), Vector(0), [ss](const Vector&) { return ss; });
  for (int i = 0; i < cols; ++i) p.scen.input_names.push_back("w" + std::to_string(i));
  for (int i = 0; i < rows; ++i) p.scen.output_names.push_back("y" + std::to_string(i));
  p.nominal = Vector(0);
  return p;
}

PartialScenario parse_block_diagram(const Obj& m) {
  const std::string prefix = m.has("prefix") ? m.string("prefix") + "." : "";
  const BlockDiagram d = parse_diagram(m);
  PartialScenario p;
  try {
    p.scen.system = assemble(d, prefix);
  } catch (const Error& e) {
    m.fail(e.what());
  }
  p.scen.input_names = d.inputs;
  p.scen.output_names = d.outputs;
  p.nominal = nominal_parameters(d);
  return p;
}

PartialScenario parse_diagram_set(const Obj& m) {
  m.allow({"type", "diagrams"});
  const json& list = m.array("diagrams");
  std::vector<std::pair<std::string, BlockDiagram>> parts;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const Obj o(list[i], index_path(m.sub("diagrams"), i), m.source());
    const std::string prefix = o.string("prefix");
    if (prefix.empty() || prefix.find('.') != std::string::npos)
      o.fail("prefix", "must be nonempty without '.'");
    parts.emplace_back(prefix, parse_diagram(o));
  }
  if (parts.empty()) m.fail("diagrams", "at least one diagram is required");
  std::sort(parts.begin(), parts.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < parts.size(); ++i)
    if (parts[i].first == parts[i - 1].first) m.fail("diagrams", "duplicate prefix '" + parts[i].first + "'");
  PartialScenario p;
  std::vector<ParamSystem> fams;
  std::vector<double> nom;
  for (const auto& [prefix, d] : parts) {
    try {
      fams.push_back(assemble(d, prefix + "."));
    } catch (const Error& e) {
      m.fail(e.what());
    }
    const Vector n = nominal_parameters(d);
    nom.insert(nom.end(), n.data(), n.data() + n.size());
    for (const auto& s : d.inputs) p.scen.input_names.push_back(prefix + "." + s);
    for (const auto& s : d.outputs) p.scen.output_names.push_back(prefix + "." + s);
  }
  p.scen.system = append_families(fams);
  p.nominal = Eigen::Map<Vector>(nom.data(), static_cast<Eigen::Index>(nom.size()));
  return p;
}

PartialScenario parse_grid_model(const Obj& m) {
  m.allow({"type", "s_base", "f_base", "bus_kinds", "branches", "prosumers", "outputs"});
  const double s_base = m.number("s_base", 1.0);
  const double f_base = m.number("f_base", 50.0);
  if (!(s_base > 0.0)) m.fail("s_base", "must be positive");
  if (!(f_base > 0.0)) m.fail("f_base", "must be positive");
  std::vector<BusKind> kinds;
  const json& bk = m.array("bus_kinds");
  for (std::size_t i = 0; i < bk.size(); ++i) {
    const std::string path = index_path(m.sub("bus_kinds"), i);
    if (!bk[i].is_string()) config_error(m.source(), path, "expected \"dynamic\" or \"static\"");
    const std::string s = bk[i].get<std::string>();
    if (s == "dynamic")
      kinds.push_back(BusKind::Dynamic);
    else if (s == "static")
      kinds.push_back(BusKind::Static);
    else
      config_error(m.source(), path, "expected \"dynamic\" or \"static\", got \"" + s + "\"");
  }
  const int nb = static_cast<int>(kinds.size());
  std::vector<Branch> branches;
  const json& br = m.array("branches");
  for (std::size_t i = 0; i < br.size(); ++i) {
    const Obj o(br[i], index_path(m.sub("branches"), i), m.source());
    o.allow({"from", "to", "r", "x", "b_shunt"});
    Branch b{o.integer("from"), o.integer("to"), o.number("r", 0.0), o.number("x"), o.number("b_shunt", 0.0)};
    if (b.from < 0 || b.from >= nb || b.to < 0 || b.to >= nb || b.from == b.to)
      o.fail("branch endpoints must be distinct buses in [0, " + std::to_string(nb) + ")");
    if (b.r == 0.0 && b.x == 0.0) o.fail("branch impedance is zero");
    branches.push_back(b);
  }

  Network net;
  try {
    net = Network::from_branches(nb, branches, kinds, s_base);
  } catch (const Error& e) {
    m.fail("branches", e.what());
  }

  const double omega_base = 2.0 * 3.14159265358979323846 * f_base;
  std::vector<std::shared_ptr<const DynamicProsumer>> dyn;
  std::vector<StaticProsumer> statics;
  const json& pr = m.array("prosumers");
  for (std::size_t i = 0; i < pr.size(); ++i) {
    const Obj o(pr[i], index_path(m.sub("prosumers"), i), m.source());
    const std::string type = o.string("type");
    try {
      if (type == "droop_inverter") {
        o.allow({"type", "id", "bus", "rating", "K_P", "K_Q", "T_f", "T_v", "omega_c", "v_c",
                 "omega_limits", "v_limits", "bounds"});
        DroopInverter inv;
        inv.id = o.string("id");
        inv.rating = o.number("rating", s_base);
        inv.k_p = o.number("K_P", inv.k_p);
        inv.k_q = o.number("K_Q", inv.k_q);
        inv.t_f = o.number("T_f", inv.t_f);
        inv.t_v = o.number("T_v", inv.t_v);
        inv.omega_c = o.number("omega_c", 1.0);
        inv.v_c = o.number("v_c", 1.0);
        inv.omega_base = omega_base;
        if (o.has("omega_limits")) std::tie(inv.omega_min, inv.omega_max) = o.interval("omega_limits");
        if (o.has("v_limits")) std::tie(inv.v_min, inv.v_max) = o.interval("v_limits");
        if (o.has("bounds")) {
          const Obj b = o.object("bounds");
          b.allow({"K_P", "K_Q", "T_f", "T_v"});
          auto set = [&](const char* key, Bounds& dst) {
            if (b.has(key)) {
              const auto [lo, hi] = b.interval(key);
              dst = {lo, hi};
            }
          };
          set("K_P", inv.k_p_bounds);
          set("K_Q", inv.k_q_bounds);
          set("T_f", inv.t_f_bounds);
          set("T_v", inv.t_v_bounds);
        }
        inv.validate();
        dyn.push_back(std::make_shared<DroopProsumer>(inv, o.integer("bus"), s_base));
      } else if (type == "swing_generator") {
        o.allow({"type", "id", "bus", "H", "D", "p_ref", "v_set", "rating", "governor"});
        SwingGenerator g;
        g.id = o.string("id");
        g.h = o.number("H", g.h);
        g.damping = o.number("D", g.damping);
        g.p_ref = o.number("p_ref", 0.0);
        g.v_set = o.number("v_set", 1.0);
        g.rating = o.number("rating", s_base);
        g.omega_base = omega_base;
        if (o.has("governor")) g.governor = parse_diagram(o.object("governor"));
        dyn.push_back(std::make_shared<SwingProsumer>(g, o.integer("bus"), s_base));
      } else if (type == "static") {
        o.allow({"type", "id", "bus", "P", "Q", "disturb"});
        StaticProsumer s;
        s.id = o.string("id");
        s.bus = o.integer("bus");
        s.p_c = o.number("P", 0.0);
        s.q_c = o.number("Q", 0.0);
        if (o.has("disturb")) {
          const json& d = o.array("disturb");
          for (std::size_t k = 0; k < d.size(); ++k) {
            const std::string c = d[k].is_string() ? d[k].get<std::string>() : "";
            if (c == "P")
              s.disturb_p = true;
            else if (c == "Q")
              s.disturb_q = true;
            else
              config_error(o.source(), index_path(o.sub("disturb"), k), "expected \"P\" or \"Q\"");
          }
        }
        statics.push_back(s);
      } else {
        o.fail("type", "unknown prosumer type '" + type + "'");
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Config) throw;
      o.fail(e.what());
    }
  }

  PartialScenario p;
  try {
    p.coupled = std::make_shared<const CoupledSystem>(build_coupled_system(net, dyn, statics));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Config) throw;
    m.fail("prosumers", e.what());
  }
  const std::string outputs = m.string("outputs", "omega");
  if (outputs != "omega" && outputs != "omega+power")
    m.fail("outputs", "expected \"omega\" or \"omega+power\"");
  p.power_outputs = outputs == "omega+power";
  p.scen.input_names = p.coupled->disturbance_names();
  p.nominal = p.coupled->nominal();
  return p;
}

PartialScenario parse_model(const Obj& m) {
  const std::string type = m.string("type");
  if (type == "transfer_matrix") return parse_transfer_matrix(m);
  if (type == "block_diagram") return parse_block_diagram(m);
  if (type == "diagram_set") return parse_diagram_set(m);
  if (type == "grid") return parse_grid_model(m);
  m.fail("type", "unknown model type '" + type + "'");
}

std::vector<std::string> family_names(const PartialScenario& p) {
  return p.coupled ? p.coupled->param_names() : p.scen.system.names();
}
Vector family_lower(const PartialScenario& p) {
  return p.coupled ? p.coupled->lower() : p.scen.system.lower();
}
Vector family_upper(const PartialScenario& p) {
  return p.coupled ? p.coupled->upper() : p.scen.system.upper();
}

// Grid models: operating point and zero-mode-free linear families at k.
void finish_grid(PartialScenario& p, const Vector& k) {
  if (!p.coupled) return;
  const CoupledSystem& sys = *p.coupled;
  auto op = std::make_shared<OperatingPoint>(sys.solve_operating_point(k));
  LinearizeOptions lo;
  lo.power_outputs = p.power_outputs;
  p.scen.system = remove_zero_mode(linearize(sys, *op, lo), k).reduced;
  LinearizeOptions sim;
  sim.power_outputs = true;
  p.scen.sim_system = remove_zero_mode(linearize(sys, *op, sim), k).reduced;
  std::vector<std::string> om, pw;
  for (const auto& d : sys.dynamic()) {
    om.push_back(d->id() + ".omega");
    pw.push_back(d->id() + ".P");
  }
  p.scen.output_names = om;
  if (p.power_outputs) p.scen.output_names.insert(p.scen.output_names.end(), pw.begin(), pw.end());
  p.scen.sim_output_names = om;
  p.scen.sim_output_names.insert(p.scen.sim_output_names.end(), pw.begin(), pw.end());
  p.scen.grid_model = p.coupled;
  p.scen.op = op;
}

Vector parse_parameter_values(const json& j, const std::string& path, const std::string& source,
                              const std::vector<std::string>& names, Vector base) {
  const Obj o(j, path, source);
  for (auto it = o.raw().begin(); it != o.raw().end(); ++it) {
    auto pos = std::find(names.begin(), names.end(), it.key());
    if (pos == names.end()) o.fail(it.key(), "unknown parameter");
    base(pos - names.begin()) = o.number(it.key());
  }
  return base;
}

// Inline object, or a path to a file holding {"parameters": {...}}.
Vector resolve_parameters(const Obj& parent, const std::string& key, const fs::path& base_dir,
                          const std::vector<std::string>& names, const Vector& base,
                          std::vector<fs::path>& inputs) {
  const json& v = parent.at(key);
  if (v.is_string()) {
    fs::path file = v.get<std::string>();
    if (file.is_relative()) file = base_dir / file;
    const std::string text = read_file(file);
    const json doc = parse_json(text, file.string());
    inputs.push_back(file);
    const json& params = doc.is_object() && doc.contains("parameters") ? doc.at("parameters") : doc;
    return parse_parameter_values(params, "parameters", file.string(), names, base);
  }
  return parse_parameter_values(v, parent.sub(key), parent.source(), names, base);
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xf];
  return s;
}

RunConfig load_config(const fs::path& path) {
  const std::string text = read_file(path);
  RunConfig cfg = parse_config(text, path.parent_path(), path.string());
  cfg.path = path;
  cfg.inputs.insert(cfg.inputs.begin(), path);
  return cfg;
}

RunConfig parse_config(const std::string& text, const fs::path& base_dir, const std::string& source) {
  const json doc = parse_json(text, source);
  const Obj root(doc, "", source);
  root.allow({"name", "seed", "model", "scenarios", "parameters", "analyze", "tune", "simulate",
              "description"});

  RunConfig cfg;
  cfg.hash = hex64(fnv1a64(text));
  cfg.name = root.string("name", "run");
  if (root.has("seed")) {
    const json& s = root.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      root.fail("seed", "expected a nonnegative integer");
    cfg.seed = s.get<std::uint64_t>();
  }

  std::vector<PartialScenario> parts;
  std::vector<FrequencyGrid> grids;
  if (root.has("model") == root.has("scenarios"))
    root.fail("exactly one of 'model' and 'scenarios' is required");
  if (root.has("model")) {
    parts.push_back(parse_model(root.object("model")));
    parts.back().scen.name = "main";
  } else {
    const json& list = root.array("scenarios");
    if (list.empty()) root.fail("scenarios", "at least one scenario is required");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const Obj s(list[i], index_path("scenarios", i), source);
      s.allow({"name", "model", "grid"});
      PartialScenario p = parse_model(s.object("model"));
      p.scen.name = s.string("name", "s" + std::to_string(i));
      if (!seen.insert(p.scen.name).second) s.fail("name", "duplicate scenario name");
      if (s.has("grid")) p.scen.grid = parse_grid(s.object("grid"));
      parts.push_back(std::move(p));
    }
  }

  cfg.param_names = family_names(parts.front());
  cfg.lower = family_lower(parts.front());
  cfg.upper = family_upper(parts.front());
  for (std::size_t i = 1; i < parts.size(); ++i) {
    if (family_names(parts[i]) != cfg.param_names || family_lower(parts[i]) != cfg.lower ||
        family_upper(parts[i]) != cfg.upper)
      config_error(source, index_path("scenarios", i),
                   "scenario parameters or bounds differ from the first scenario");
  }

  cfg.k_initial = parts.front().nominal;
  if (root.has("parameters"))
    cfg.k_initial = resolve_parameters(root, "parameters", base_dir, cfg.param_names,
                                       cfg.k_initial, cfg.inputs);
  for (Eigen::Index i = 0; i < cfg.k_initial.size(); ++i) {
    if (cfg.k_initial(i) < cfg.lower(i) || cfg.k_initial(i) > cfg.upper(i))
      config_error(source, "parameters." + cfg.param_names[i], "initial value outside its bounds");
  }

  for (auto& p : parts) {
    finish_grid(p, cfg.k_initial);
    cfg.scenarios.push_back(std::move(p.scen));
  }

  if (root.has("analyze")) {
    const Obj a = root.object("analyze");
    a.allow({"sweep", "norm_tol"});
    if (a.has("sweep")) cfg.analyze.sweep = parse_grid(a.object("sweep"));
    cfg.analyze.norm_tol = a.number("norm_tol", cfg.analyze.norm_tol);
    if (!(cfg.analyze.norm_tol > 0.0)) a.fail("norm_tol", "must be positive");
  }

  const Eigen::Index np = static_cast<Eigen::Index>(cfg.param_names.size());
  cfg.tune.grid0 = FrequencyGrid::logspace(1e-2, 1e3, 50);
  double fraction = 0.25;
  const json* dk_json = nullptr;
  if (root.has("tune")) {
    const Obj t = root.object("tune");
    t.allow({"delta_k", "delta_k_fraction", "alpha", "k_max", "conv_tol", "grid", "validation_grid",
             "stability_margin", "subproblem_tol", "norm_tol"});
    fraction = t.number("delta_k_fraction", fraction);
    if (!(fraction > 0.0)) t.fail("delta_k_fraction", "must be positive");
    cfg.tune.alpha = t.number("alpha", cfg.tune.alpha);
    if (!(cfg.tune.alpha > 0.0 && cfg.tune.alpha < 1.0)) t.fail("alpha", "must lie in (0, 1)");
    cfg.tune.k_max = t.integer("k_max", cfg.tune.k_max);
    if (cfg.tune.k_max < 1) t.fail("k_max", "must be at least 1");
    cfg.tune.conv_tol = t.number("conv_tol", cfg.tune.conv_tol);
    if (!(cfg.tune.conv_tol >= 0.0)) t.fail("conv_tol", "must be nonnegative");
    cfg.tune.stability_margin = t.number("stability_margin", cfg.tune.stability_margin);
    cfg.tune.subproblem_tol = t.number("subproblem_tol", cfg.tune.subproblem_tol);
    cfg.tune.norm_tol = t.number("norm_tol", cfg.tune.norm_tol);
    if (!(cfg.tune.subproblem_tol > 0.0)) t.fail("subproblem_tol", "must be positive");
    if (!(cfg.tune.norm_tol > 0.0)) t.fail("norm_tol", "must be positive");
    if (t.has("grid")) cfg.tune.grid0 = parse_grid(t.object("grid"));
    if (t.has("validation_grid")) cfg.tune.validation_grid = parse_grid(t.object("validation_grid"));
    if (t.has("delta_k")) dk_json = &t.at("delta_k");
  }
  cfg.tune.delta_k0 = fraction * (cfg.upper - cfg.lower);
  for (Eigen::Index i = 0; i < np; ++i)
    if (!(cfg.tune.delta_k0(i) > 0.0))
      cfg.tune.delta_k0(i) = fraction * std::max(1.0, std::abs(cfg.k_initial(i)));
  if (dk_json != nullptr) {
    cfg.tune.delta_k0 =
        parse_parameter_values(*dk_json, "tune.delta_k", source, cfg.param_names, cfg.tune.delta_k0);
    for (Eigen::Index i = 0; i < np; ++i)
      if (!(cfg.tune.delta_k0(i) > 0.0))
        config_error(source, "tune.delta_k." + cfg.param_names[i], "step must be positive");
  }

  if (root.has("simulate")) {
    const Obj s = root.object("simulate");
    s.allow({"horizon", "dt", "step_time", "step", "nonlinear", "compare"});
    auto& sim = cfg.simulate;
    sim.horizon = s.number("horizon", sim.horizon);
    sim.dt = s.number("dt", sim.dt);
    sim.step_time = s.number("step_time", sim.step_time);
    if (!(sim.dt > 0.0)) s.fail("dt", "must be positive");
    if (!(sim.horizon >= 10.0 * sim.dt)) s.fail("horizon", "must cover at least 10 steps");
    if (!(sim.step_time >= 0.0 && sim.step_time < sim.horizon))
      s.fail("step_time", "must lie in [0, horizon)");
    sim.nonlinear = s.boolean("nonlinear", sim.nonlinear);
    if (s.has("step")) {
      const Obj st = s.object("step");
      for (auto it = st.raw().begin(); it != st.raw().end(); ++it) {
        for (const auto& sc : cfg.scenarios) {
          if (std::find(sc.input_names.begin(), sc.input_names.end(), it.key()) ==
              sc.input_names.end())
            st.fail(it.key(), "no input of that name in scenario '" + sc.name + "'");
        }
        sim.step[it.key()] = st.number(it.key());
      }
    }
    if (s.has("compare")) {
      const Obj c = s.object("compare");
      c.allow({"label", "parameters"});
      sim.compare_label = c.string("label", sim.compare_label);
      if (sim.compare_label.empty() || sim.compare_label == "initial")
        c.fail("label", "must be nonempty and differ from 'initial'");
      sim.compare = resolve_parameters(c, "parameters", base_dir, cfg.param_names, cfg.k_initial,
                                       cfg.inputs);
    }
  }
  return cfg;
}

}  // namespace hinftune
