#include "hinftune/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <spdlog/spdlog.h>

namespace hinftune {

namespace {

struct Evaluation {
  bool ok = false;      // realization could be built
  bool stable = false;
  double norm = kInf;
  double validation_norm = kInf;
  std::vector<double> peaks;     // per scenario, valid where stable
  std::vector<bool> scen_stable;
  std::string error;
};

Evaluation evaluate(const ScenarioSet& scen, const Vector& k, const TuneConfig& cfg) {
  Evaluation ev;
  const std::size_t ns = scen.systems.size();
  ev.peaks.assign(ns, 0.0);
  ev.scen_stable.assign(ns, false);
  ev.ok = true;
  ev.stable = true;
  ev.norm = 0.0;
  ev.validation_norm = cfg.validation_grid.empty() ? kInf : 0.0;
  for (std::size_t s = 0; s < ns; ++s) {
    StateSpace g;
    try {
      g = scen.systems[s](k);
    } catch (const Error& e) {
      ev.ok = false;
      ev.stable = false;
      ev.norm = kInf;
      ev.error = e.what();
      return ev;
    }
    if (!is_stable(g, cfg.stability_margin)) {
      ev.stable = false;
      ev.norm = kInf;
      continue;
    }
    const HinfResult h = hinf_norm_bisect(g, cfg.norm_tol);
    if (!h.stable || !std::isfinite(h.norm)) {
      ev.stable = false;
      ev.norm = kInf;
      continue;
    }
    ev.scen_stable[s] = true;
    ev.peaks[s] = h.peak_omega;
    if (ev.stable) ev.norm = std::max(ev.norm, h.norm);
    if (!cfg.validation_grid.empty())
      ev.validation_norm =
          std::max(ev.validation_norm, hinf_norm_grid(g, cfg.validation_grid).norm);
  }
  if (!ev.stable) ev.validation_norm = kInf;
  return ev;
}

std::string format_eigenvalues(const std::vector<Complex>& ev) {
  std::ostringstream os;
  os.precision(6);
  for (std::size_t i = 0; i < ev.size(); ++i) {
    if (i) os << ", ";
    os << ev[i].real() << (ev[i].imag() < 0 ? "-" : "+") << std::abs(ev[i].imag()) << "j";
  }
  return os.str();
}

bool grid_contains(const FrequencyGrid& grid, double omega) {
  FrequencyGrid copy = grid;
  return !copy.insert(omega);
}

}  // namespace

void TuneConfig::validate(Eigen::Index params) const {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw Error(ErrorKind::InvalidArgument, "alpha must lie in (0, 1)");
  if (delta_k0.size() != params)
    throw Error(ErrorKind::InvalidArgument, "trust region has " + std::to_string(delta_k0.size()) +
                                                " entries, expected " + std::to_string(params));
  if (!(delta_k0.array() > 0.0).all() || !delta_k0.allFinite())
    throw Error(ErrorKind::InvalidArgument, "trust region must be positive");
  if (k_max < 1) throw Error(ErrorKind::InvalidArgument, "k_max must be at least 1");
  if (!(conv_tol >= 0.0)) throw Error(ErrorKind::InvalidArgument, "conv_tol must be nonnegative");
}

int refine_grid(FrequencyGrid& grid, const ParamSystem& sys, const Vector& k_rejected,
                double peak_omega, double margin) {
  int added = 0;
  try {
    const StateSpace g = sys(k_rejected);
    const PoleSet p = poles(g);
    const Complex* worst = nullptr;
    for (const auto& l : p.poles)
      if (l.real() > -margin && (worst == nullptr || l.real() > worst->real())) worst = &l;
    if (worst != nullptr && grid.insert(std::abs(worst->imag()))) ++added;
  } catch (const Error&) {
  }
  if (std::isfinite(peak_omega) && peak_omega >= 0.0 && grid.insert(peak_omega)) ++added;
  return added;
}

bool safeguard_check(const TuneReport& report) {
  double last = report.norm0;
  if (!std::isfinite(last)) return false;
  for (const auto& it : report.iterations) {
    if (!it.accepted) continue;
    if (!it.stable || !std::isfinite(it.norm)) return false;
    if (!(it.norm < last)) return false;
    last = it.norm;
  }
  return report.norm_opt == last;
}

TuneReport tune(const ParamSystem& sys, const Vector& k0, const TuneConfig& cfg) {
  ScenarioSet scen;
  scen.systems = {sys};
  scen.grids = {cfg.grid0};
  return tune_multi(scen, k0, cfg);
}

TuneReport tune_multi(const ScenarioSet& scen, const Vector& k0, const TuneConfig& cfg) {
  const std::size_t ns = scen.systems.size();
  if (ns == 0) throw Error(ErrorKind::InvalidArgument, "no scenarios to tune");
  const ParamSystem& ref = scen.systems.front();
  for (const auto& s : scen.systems) {
    if (s.names() != ref.names() || s.lower() != ref.lower() || s.upper() != ref.upper())
      throw Error(ErrorKind::InvalidArgument, "scenarios disagree on parameters or bounds");
  }
  cfg.validate(ref.size());
  if (!ref.in_box(k0)) throw Error(ErrorKind::InvalidArgument, "initial parameters outside the box");

  std::vector<FrequencyGrid> grids(ns);
  for (std::size_t s = 0; s < ns; ++s) {
    grids[s] = s < scen.grids.size() && !scen.grids[s].empty() ? scen.grids[s] : cfg.grid0;
    if (grids[s].empty()) throw Error(ErrorKind::InvalidArgument, "empty frequency grid");
  }

  // Initial stability.
  for (std::size_t s = 0; s < ns; ++s) {
    const StateSpace g = scen.systems[s](k0);
    if (!is_stable(g, cfg.stability_margin)) {
      std::vector<Complex> bad;
      for (const auto& l : poles(g).poles)
        if (l.real() >= -cfg.stability_margin) bad.push_back(l);
      throw UnstableStartError("initial parameters do not stabilize scenario " +
                                   std::to_string(s) + "; eigenvalues " + format_eigenvalues(bad),
                               bad);
    }
  }
  Evaluation current = evaluate(scen, k0, cfg);
  if (!current.stable)
    throw UnstableStartError("initial parameters do not give a finite norm", {});

  TuneReport report;
  report.names = ref.names();
  report.k0 = k0;
  report.norm0 = current.norm;
  report.k_opt = k0;
  report.norm_opt = current.norm;

  Vector k = k0;
  Vector dk = cfg.delta_k0;
  int small_streak = 0;
  int reject_streak = 0;
  report.termination = "k_max";

  for (int iter = 1; iter <= cfg.k_max; ++iter) {
    TuneIteration rec;
    rec.index = iter;
    rec.delta_k = dk;

    SubproblemSpec spec;
    for (std::size_t s = 0; s < ns; ++s)
      spec.models.push_back(linearize_response(scen.systems[s], k, grids[s]));
    spec.k_min = ref.lower();
    spec.k_max = ref.upper();
    spec.delta_k = dk;
    spec.tol = cfg.subproblem_tol;
    const SubproblemSolution sub = solve_subproblem(spec);
    rec.k = sub.k_next;
    rec.subproblem_gamma = sub.gamma;

    bool accept = false;
    bool stationary = false;
    Evaluation cand;
    if (!(sub.gamma < current.norm * (1.0 - 10.0 * cfg.subproblem_tol))) {
      rec.note = "no predicted descent";
      stationary = true;
      for (std::size_t s = 0; s < ns; ++s)
        if (!grid_contains(grids[s], current.peaks[s])) stationary = false;
    } else {
      cand = evaluate(scen, sub.k_next, cfg);
      rec.stable = cand.stable;
      rec.norm = cand.norm;
      rec.validation_norm = cand.validation_norm;
      if (!cand.ok) {
        rec.note = "evaluation failed: " + cand.error;
      } else if (!cand.stable) {
        rec.note = "unstable";
      } else if (!(cand.norm < current.norm)) {
        rec.note = "norm increase";
      } else {
        accept = true;
      }
    }

    if (accept) {
      const double improvement = (current.norm - cand.norm) / current.norm;
      rec.accepted = true;
      rec.peak_omega = *std::max_element(cand.peaks.begin(), cand.peaks.end());
      k = sub.k_next;
      current = cand;
      report.k_opt = k;
      report.norm_opt = current.norm;
      reject_streak = 0;
      small_streak = improvement < cfg.conv_tol ? small_streak + 1 : 0;
      spdlog::debug("iteration {}: accepted, norm {:.10g}", iter, current.norm);
      report.iterations.push_back(std::move(rec));
      if (small_streak >= 3) {
        report.termination = "converged";
        break;
      }
      continue;
    }

    if (stationary) {
      report.iterations.push_back(std::move(rec));
      report.termination = "stationary";
      break;
    }

    rec.shrink = true;
    for (std::size_t s = 0; s < ns; ++s) {
      const bool cand_stable = cand.ok && s < cand.scen_stable.size() && cand.scen_stable[s];
      const double peak = cand_stable ? cand.peaks[s] : current.peaks[s];
      rec.grid_additions +=
          refine_grid(grids[s], scen.systems[s], sub.k_next, peak, cfg.stability_margin);
    }
    dk *= cfg.alpha;
    ++reject_streak;
    spdlog::debug("iteration {}: rejected ({})", iter, rec.note);
    report.iterations.push_back(std::move(rec));

    if (reject_streak >= 10 && (dk.array() / cfg.delta_k0.array()).maxCoeff() < 1e-9) {
      for (const auto& g : grids) report.final_grid_sizes.push_back(g.size());
      throw TuneError(ErrorKind::NoProgress,
                      "no accepted iterate in the last 10 iterations with a vanishing trust region",
                      std::move(report));
    }
  }
  for (const auto& g : grids) report.final_grid_sizes.push_back(g.size());
  return report;
}

}  // namespace hinftune
