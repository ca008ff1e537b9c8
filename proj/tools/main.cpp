#include <cstdio>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "hinftune.h"

namespace {

int exit_code(ht_status s) {
  switch (s) {
    case HT_OK:
      return 0;
    case HT_ERR_ARG:
    case HT_ERR_CONFIG:
    case HT_ERR_IO:
      return 2;
    default:
      return 3;
  }
}

struct Options {
  std::string config;
  std::string out_dir = "out";
  int threads = 1;
  std::string log_level = "info";
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structured H-infinity tuning of parameterized linear systems"};
  app.set_version_flag("--version", std::string(ht_version()));
  app.require_subcommand(1);

  Options opt;
  const std::map<std::string, ht_log_level> levels = {
      {"trace", HT_LOG_TRACE}, {"debug", HT_LOG_DEBUG}, {"info", HT_LOG_INFO},
      {"warn", HT_LOG_WARN},   {"error", HT_LOG_ERROR}, {"off", HT_LOG_OFF}};

  app.option_defaults()->always_capture_default();
  app.fallthrough();
  app.add_option("--out-dir", opt.out_dir, "Directory for outputs");
  app.add_option("--threads", opt.threads, "Worker threads for frequency sweeps")
      ->check(CLI::Range(1, 1024));
  app.add_option("--log-level", opt.log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  struct Command {
    const char* name;
    const char* help;
    ht_status (*run)(ht_context*, const char*, const char*);
  };
  const Command commands[] = {
      {"analyze", "Poles, singular value sweep and H-infinity norm", &ht_analyze},
      {"tune", "Tune the parameters to minimize the H-infinity norm", &ht_tune},
      {"simulate", "Linear and nonlinear step responses with metrics", &ht_simulate},
  };
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", opt.config, "Configuration file")->required();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  ht_context* ctx = ht_context_create();
  if (ctx == nullptr) {
    std::fprintf(stderr, "hinftune: error: out of memory\n");
    return 3;
  }
  ht_status s = ht_set_log_level(ctx, levels.at(opt.log_level));
  if (s == HT_OK) s = ht_set_threads(ctx, opt.threads);
  if (s == HT_OK) {
    for (const auto& c : commands) {
      if (app.got_subcommand(c.name)) {
        s = c.run(ctx, opt.config.c_str(), opt.out_dir.c_str());
        break;
      }
    }
  }
  if (s != HT_OK)
    std::fprintf(stderr, "hinftune: %s: %s\n", ht_status_string(s), ht_last_error(ctx));
  ht_context_destroy(ctx);
  return exit_code(s);
}
