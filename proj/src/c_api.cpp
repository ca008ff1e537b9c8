#include "hinftune.h"

#include <exception>
#include <memory>
#include <new>
#include <string>

#include <spdlog/spdlog.h>

#include "hinftune/config.hpp"
#include "hinftune/parallel.hpp"
#include "hinftune/pipeline.hpp"

struct ht_context {
  std::string last_error;
};

struct ht_system {
  hinftune::StateSpace ss;
};

struct ht_model {
  hinftune::RunConfig cfg;
};

namespace {

using hinftune::Error;
using hinftune::ErrorKind;

ht_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument:
      return HT_ERR_ARG;
    case ErrorKind::Config:
      return HT_ERR_CONFIG;
    case ErrorKind::Io:
      return HT_ERR_IO;
    default:
      return HT_ERR_NUMERIC;
  }
}

template <class F>
ht_status guarded(ht_context* ctx, F&& f) {
  if (ctx != nullptr) ctx->last_error.clear();
  auto fail = [&](ht_status s, const std::string& msg) {
    if (ctx != nullptr) ctx->last_error = msg;
    return s;
  };
  try {
    return f();
  } catch (const Error& e) {
    return fail(status_of(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(HT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(HT_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(HT_ERR_INTERNAL, "unknown failure");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorKind::InvalidArgument, what);
}

hinftune::Matrix row_major(const double* p, size_t rows, size_t cols) {
  hinftune::Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (size_t i = 0; i < rows; ++i)
    for (size_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = p[i * cols + j];
  return m;
}

ht_status pipeline(ht_context* ctx, const char* config, const char* out_dir,
                   hinftune::RunResult (*run)(const hinftune::RunConfig&,
                                              const std::filesystem::path&)) {
  return guarded(ctx, [&] {
    require(config != nullptr && out_dir != nullptr, "config path and output directory are required");
    const hinftune::RunConfig cfg = hinftune::load_config(config);
    const hinftune::RunResult res = run(cfg, out_dir);
    spdlog::info("{}: {}", cfg.name, res.summary);
    return HT_OK;
  });
}

}  // namespace

extern "C" {

const char* ht_version(void) { return hinftune::kToolVersion; }

const char* ht_status_string(ht_status status) {
  switch (status) {
    case HT_OK:
      return "ok";
    case HT_ERR_ARG:
      return "invalid argument";
    case HT_ERR_CONFIG:
      return "configuration error";
    case HT_ERR_NUMERIC:
      return "numerical failure";
    case HT_ERR_IO:
      return "i/o error";
    case HT_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

ht_context* ht_context_create(void) { return new (std::nothrow) ht_context(); }

void ht_context_destroy(ht_context* ctx) { delete ctx; }

const char* ht_last_error(const ht_context* ctx) {
  return ctx != nullptr ? ctx->last_error.c_str() : "";
}

ht_status ht_set_threads(ht_context* ctx, int threads) {
  return guarded(ctx, [&] {
    require(threads >= 0, "thread count must be nonnegative");
    hinftune::set_thread_count(threads == 0 ? 1 : threads);
    return HT_OK;
  });
}

ht_status ht_set_log_level(ht_context* ctx, ht_log_level level) {
  return guarded(ctx, [&] {
    require(level >= HT_LOG_TRACE && level <= HT_LOG_OFF && level != 5, "unknown log level");
    spdlog::set_level(static_cast<spdlog::level::level_enum>(level));
    return HT_OK;
  });
}

ht_status ht_analyze(ht_context* ctx, const char* config_path, const char* out_dir) {
  return pipeline(ctx, config_path, out_dir, &hinftune::run_analyze);
}

ht_status ht_tune(ht_context* ctx, const char* config_path, const char* out_dir) {
  return pipeline(ctx, config_path, out_dir, &hinftune::run_tune);
}

ht_status ht_simulate(ht_context* ctx, const char* config_path, const char* out_dir) {
  return pipeline(ctx, config_path, out_dir, &hinftune::run_simulate);
}

ht_status ht_system_create(ht_context* ctx, size_t nx, size_t nw, size_t ny, const double* a,
                           const double* b, const double* c, const double* d, ht_system** out) {
  return guarded(ctx, [&] {
    require(out != nullptr, "output handle is null");
    *out = nullptr;
    require((a != nullptr || nx == 0) && (b != nullptr || nx * nw == 0) &&
                (c != nullptr || ny * nx == 0) && (d != nullptr || ny * nw == 0),
            "matrix data is null");
    auto sys = std::make_unique<ht_system>();
    sys->ss = hinftune::StateSpace(row_major(a, nx, nx), row_major(b, nx, nw),
                                   row_major(c, ny, nx), row_major(d, ny, nw));
    *out = sys.release();
    return HT_OK;
  });
}

void ht_system_destroy(ht_system* sys) { delete sys; }

ht_status ht_system_hinf_norm(ht_context* ctx, const ht_system* sys, double tol, double* norm,
                              double* peak_omega) {
  return guarded(ctx, [&] {
    require(sys != nullptr && norm != nullptr, "null argument");
    require(tol > 0.0, "tolerance must be positive");
    if (!hinftune::is_stable(sys->ss)) {
      *norm = hinftune::kInf;
      if (peak_omega != nullptr) *peak_omega = hinftune::kInf;
      return HT_OK;
    }
    const hinftune::HinfResult h = hinftune::hinf_norm_bisect(sys->ss, tol);
    *norm = h.norm;
    if (peak_omega != nullptr) *peak_omega = h.peak_omega;
    return HT_OK;
  });
}

ht_status ht_system_poles(ht_context* ctx, const ht_system* sys, double* re, double* im,
                          size_t capacity, size_t* count) {
  return guarded(ctx, [&] {
    require(sys != nullptr && count != nullptr, "null argument");
    require(capacity == 0 || (re != nullptr && im != nullptr), "pole buffers are null");
    const hinftune::PoleSet p = hinftune::poles(sys->ss);
    *count = p.poles.size();
    for (size_t i = 0; i < p.poles.size() && i < capacity; ++i) {
      re[i] = p.poles[i].real();
      im[i] = p.poles[i].imag();
    }
    return HT_OK;
  });
}

ht_status ht_system_sigma_max(ht_context* ctx, const ht_system* sys, const double* omegas,
                              size_t n, double* sigma) {
  return guarded(ctx, [&] {
    require(sys != nullptr && (n == 0 || (omegas != nullptr && sigma != nullptr)), "null argument");
    for (size_t i = 0; i < n; ++i)
      sigma[i] = hinftune::sigma_max(hinftune::eval_freq(sys->ss, omegas[i]));
    return HT_OK;
  });
}

ht_status ht_model_load(ht_context* ctx, const char* config_path, ht_model** out) {
  return guarded(ctx, [&] {
    require(config_path != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    auto m = std::make_unique<ht_model>();
    m->cfg = hinftune::load_config(config_path);
    *out = m.release();
    return HT_OK;
  });
}

void ht_model_destroy(ht_model* model) { delete model; }

size_t ht_model_parameter_count(const ht_model* model) {
  return model != nullptr ? model->cfg.param_names.size() : 0;
}

const char* ht_model_parameter_name(const ht_model* model, size_t index) {
  if (model == nullptr || index >= model->cfg.param_names.size()) return nullptr;
  return model->cfg.param_names[index].c_str();
}

ht_status ht_model_parameters(ht_context* ctx, const ht_model* model, double* initial,
                              double* lower, double* upper) {
  return guarded(ctx, [&] {
    require(model != nullptr, "null model");
    const auto& c = model->cfg;
    for (Eigen::Index i = 0; i < c.k_initial.size(); ++i) {
      if (initial != nullptr) initial[i] = c.k_initial(i);
      if (lower != nullptr) lower[i] = c.lower(i);
      if (upper != nullptr) upper[i] = c.upper(i);
    }
    return HT_OK;
  });
}

ht_status ht_model_evaluate(ht_context* ctx, const ht_model* model, const double* k,
                            ht_system** out) {
  return guarded(ctx, [&] {
    require(model != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    const auto& c = model->cfg;
    require(k != nullptr || c.k_initial.size() == 0, "parameter vector is null");
    hinftune::Vector kv(c.k_initial.size());
    for (Eigen::Index i = 0; i < kv.size(); ++i) kv(i) = k[i];
    auto sys = std::make_unique<ht_system>();
    sys->ss = c.scenarios.front().system(kv);
    *out = sys.release();
    return HT_OK;
  });
}

}  // extern "C"
