#include "hinftune/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "hinftune/sim.hpp"

namespace hinftune {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

// Output files assembled in memory, committed after the manifest.
struct Outputs {
  std::vector<std::pair<std::string, std::string>> files;
  void add(std::string name, std::string contents) {
    files.emplace_back(std::move(name), std::move(contents));
  }
};

json number_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json params_json(const std::vector<std::string>& names, const Vector& k) {
  json o = json::object();
  for (std::size_t i = 0; i < names.size(); ++i) o[names[i]] = k(static_cast<Eigen::Index>(i));
  return o;
}

std::string timestamp() {
  std::time_t t = 0;
  if (const char* sde = std::getenv("SOURCE_DATE_EPOCH"); sde != nullptr && *sde != '\0') {
    long long v = 0;
    const auto r = std::from_chars(sde, sde + std::char_traits<char>::length(sde), v);
    if (r.ec != std::errc()) throw Error(ErrorKind::Config, "SOURCE_DATE_EPOCH is not an integer");
    t = static_cast<std::time_t>(v);
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunResult commit(const RunConfig& cfg, const fs::path& out_dir, const std::string& command,
                 const Outputs& out, std::string summary) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create '" + out_dir.string() + "': " + ec.message());

  RunResult res;
  for (const auto& [name, _] : out.files) res.outputs.push_back(name);
  json m;
  m["tool"] = kToolName;
  m["version"] = kToolVersion;
  m["command"] = command;
  m["config_name"] = cfg.name;
  m["config_hash"] = "fnv1a64:" + cfg.hash;
  m["seed"] = cfg.seed;
  m["created"] = timestamp();
  json inputs = json::array();
  for (const auto& p : cfg.inputs) inputs.push_back(p.generic_string());
  m["inputs"] = inputs;
  m["outputs"] = res.outputs;
  write_file_atomic(out_dir / "run_manifest.json", m.dump(2) + "\n");
  for (const auto& [name, contents] : out.files) write_file_atomic(out_dir / name, contents);
  res.summary = std::move(summary);
  return res;
}

std::string joined(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) s += ',';
    s += cells[i];
  }
  s += '\n';
  return s;
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorKind::Io, "cannot write '" + tmp.string() + "'");
    os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    os.flush();
    if (!os) throw Error(ErrorKind::Io, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorKind::Io, "cannot rename into '" + path.string() + "'");
  }
}

RunResult run_analyze(const RunConfig& cfg, const fs::path& out_dir) {
  std::string poles_csv = "scenario,index,real,imag\n";
  std::string sweep_csv = "scenario,omega_rad_s,freq_hz,sigma_max\n";
  json scen_json = json::array();
  std::ostringstream summary;
  for (const auto& sc : cfg.scenarios) {
    const StateSpace g = sc.system(cfg.k_initial);
    const PoleSet p = poles(g);
    for (std::size_t i = 0; i < p.poles.size(); ++i)
      poles_csv += joined({sc.name, std::to_string(i), format_number(p.poles[i].real()),
                           format_number(p.poles[i].imag())});
    const auto& w = cfg.analyze.sweep.values();
    const std::vector<double> s = sigma_sweep(g, cfg.analyze.sweep);
    double sweep_max = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      sweep_max = std::max(sweep_max, s[i]);
      sweep_csv += joined({sc.name, format_number(w[i]), format_number(w[i] / kTwoPi),
                           format_number(s[i])});
    }
    const bool stable = is_stable(g);
    HinfResult h;
    if (stable) h = hinf_norm_bisect(g, cfg.analyze.norm_tol);
    json e;
    e["name"] = sc.name;
    e["states"] = g.states();
    e["inputs"] = sc.input_names;
    e["outputs"] = sc.output_names;
    e["stable"] = stable && h.stable;
    e["spectral_abscissa"] = number_json(g.states() ? spectral_abscissa(g.a()) : -kInf);
    e["hinf_norm"] = number_json(stable ? h.norm : kInf);
    e["peak_omega_rad_s"] = number_json(stable ? h.peak_omega : kInf);
    e["peak_freq_hz"] = number_json(stable ? h.peak_omega / kTwoPi : kInf);
    e["sweep_max"] = sweep_max;
    scen_json.push_back(e);
    summary << sc.name << ": norm " << format_number(stable ? h.norm : kInf) << "; ";
  }
  json doc;
  doc["name"] = cfg.name;
  doc["parameters"] = params_json(cfg.param_names, cfg.k_initial);
  doc["norm_tol"] = cfg.analyze.norm_tol;
  doc["scenarios"] = scen_json;
  Outputs out;
  out.add("poles.csv", poles_csv);
  out.add("sigma_sweep.csv", sweep_csv);
  out.add("norm_summary.json", doc.dump(2) + "\n");
  return commit(cfg, out_dir, "analyze", out, summary.str());
}

namespace {

void tune_outputs(const RunConfig& cfg, const TuneReport& rep, Outputs& out) {
  std::vector<std::string> header = {"iteration",       "accepted",  "stable",
                                     "shrink",          "grid_additions", "subproblem_gamma",
                                     "hinf_norm",       "validation_norm", "peak_omega_rad_s",
                                     "note"};
  header.insert(header.end(), cfg.param_names.begin(), cfg.param_names.end());
  std::string csv = joined(header);
  auto row = [&](int index, bool acc, bool stable, bool shrink, int adds, double gamma, double norm,
                 double vnorm, double peak, const std::string& note, const Vector& k) {
    std::vector<std::string> cells = {std::to_string(index), acc ? "1" : "0", stable ? "1" : "0",
                                      shrink ? "1" : "0",    std::to_string(adds),
                                      format_number(gamma),  format_number(norm),
                                      format_number(vnorm),  format_number(peak),
                                      note};
    for (Eigen::Index i = 0; i < k.size(); ++i) cells.push_back(format_number(k(i)));
    csv += joined(cells);
  };
  row(0, true, true, false, 0, kInf, rep.norm0, kInf, kInf, "initial", rep.k0);
  int accepted = 0;
  for (const auto& it : rep.iterations) {
    std::string note = it.note;
    for (char& c : note)
      if (c == ',' || c == '\n') c = ';';
    row(it.index, it.accepted, it.stable, it.shrink, it.grid_additions, it.subproblem_gamma, it.norm,
        it.validation_norm, it.accepted ? it.peak_omega : kInf, note, it.k);
    accepted += it.accepted ? 1 : 0;
  }

  json s;
  s["name"] = cfg.name;
  s["termination"] = rep.termination;
  s["iterations"] = rep.iterations.size();
  s["accepted_iterations"] = accepted;
  s["norm_initial"] = number_json(rep.norm0);
  s["norm_final"] = number_json(rep.norm_opt);
  s["reduction_factor"] = number_json(rep.norm0 / rep.norm_opt);
  s["safeguard_check"] = safeguard_check(rep);
  s["scenarios"] = json::array();
  for (const auto& sc : cfg.scenarios) s["scenarios"].push_back(sc.name);
  s["final_grid_sizes"] = rep.final_grid_sizes;
  s["parameters_initial"] = params_json(cfg.param_names, rep.k0);
  s["parameters_final"] = params_json(cfg.param_names, rep.k_opt);
  json tuned;
  tuned["parameters"] = params_json(cfg.param_names, rep.k_opt);

  out.add("tune_report.csv", csv);
  out.add("tune_summary.json", s.dump(2) + "\n");
  out.add("tuned_parameters.json", tuned.dump(2) + "\n");
}

}  // namespace

RunResult run_tune(const RunConfig& cfg, const fs::path& out_dir) {
  if (cfg.param_names.empty()) throw Error(ErrorKind::Config, "model has no tunable parameters");
  ScenarioSet set;
  for (const auto& sc : cfg.scenarios) {
    set.systems.push_back(sc.system);
    set.grids.push_back(sc.grid);
  }
  TuneReport rep;
  try {
    rep = tune_multi(set, cfg.k_initial, cfg.tune);
  } catch (const TuneError& e) {
    TuneReport partial = e.report();
    partial.termination = "no_progress";
    Outputs out;
    tune_outputs(cfg, partial, out);
    commit(cfg, out_dir, "tune", out, "no progress");
    throw;
  }
  Outputs out;
  tune_outputs(cfg, rep, out);
  std::ostringstream summary;
  summary << "norm " << format_number(rep.norm0) << " -> " << format_number(rep.norm_opt) << " ("
          << rep.termination << ", " << rep.iterations.size() << " iterations)";
  return commit(cfg, out_dir, "tune", out, summary.str());
}

RunResult run_simulate(const RunConfig& cfg, const fs::path& out_dir) {
  const auto& sim = cfg.simulate;
  std::vector<std::pair<std::string, Vector>> sets = {{"initial", cfg.k_initial}};
  if (sim.compare) sets.emplace_back(sim.compare_label, *sim.compare);

  Outputs out;
  std::string metrics =
      "label,scenario,model,channel,initial,final,overshoot,settling_time_s,osc_energy,status\n";
  auto add_metrics = [&](const std::string& label, const std::string& scen, const std::string& model,
                         const Trajectory& tr) {
    for (Eigen::Index c = 0; c < tr.values.cols(); ++c) {
      std::vector<std::string> cells = {label, scen, model, tr.channels[c]};
      try {
        const ResponseMetrics m = response_metrics(tr.time, tr.values.col(c), sim.step_time);
        for (double v : {m.initial, m.final_value, m.overshoot, m.settling_time, m.osc_energy})
          cells.push_back(format_number(v));
        cells.push_back("ok");
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoSteadyState) throw;
        const double y0 = tr.values(0, c), y1 = tr.values(tr.values.rows() - 1, c);
        for (double v : {y0, y1}) cells.push_back(format_number(v));
        for (int i = 0; i < 3; ++i) cells.push_back("");
        cells.push_back("no_steady_state");
      }
      metrics += joined(cells);
    }
  };
  auto csv = [](const Trajectory& tr) {
    std::ostringstream os;
    write_csv(tr, os);
    return os.str();
  };

  for (const auto& sc : cfg.scenarios) {
    SimScenario ss;
    ss.w_step = Vector::Zero(static_cast<Eigen::Index>(sc.input_names.size()));
    for (const auto& [name, v] : sim.step) {
      const auto it = std::find(sc.input_names.begin(), sc.input_names.end(), name);
      ss.w_step(it - sc.input_names.begin()) = v;
    }
    ss.step_time = sim.step_time;
    ss.horizon = sim.horizon;
    ss.dt = sim.dt;
    const ParamSystem& lin = sc.sim_system ? *sc.sim_system : sc.system;
    const auto& names = sc.sim_system ? sc.sim_output_names : sc.output_names;
    for (const auto& [label, k] : sets) {
      const StateSpace g = lin(k);
      if (!is_stable(g))
        throw Error(ErrorKind::InitialUnstable,
                    "scenario '" + sc.name + "' is unstable for parameter set '" + label + "'");
      const Trajectory tl = step_response_linear(g, ss, names);
      out.add("trajectory_" + sc.name + "_" + label + "_linear.csv", csv(tl));
      add_metrics(label, sc.name, "linear", tl);
      if (sim.nonlinear && sc.grid_model) {
        const OperatingPoint op = sc.grid_model->solve_operating_point(k, sc.op.get());
        const Trajectory tn = simulate_nonlinear(*sc.grid_model, op, ss);
        out.add("trajectory_" + sc.name + "_" + label + "_nonlinear.csv", csv(tn));
        add_metrics(label, sc.name, "nonlinear", tn);
      }
    }
  }
  out.add("metrics.csv", metrics);
  return commit(cfg, out_dir, "simulate", out,
                std::to_string(out.files.size() - 1) + " trajectories");
}

}  // namespace hinftune
