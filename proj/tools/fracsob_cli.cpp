// Command-line driver for the experiment harness.
//
//   fracsob <subcommand> --config FILE [--seed N] [--samples N] [--out-dir DIR] [--threads N]
//
// Exit status: 0 when the verdict passes, 2 when it fails, 1 on usage or runtime errors.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "fracsob/errors.hpp"
#include "fracsob/experiments.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> samples;
  std::optional<std::string> out_dir;
  bool quiet = false;
};

int run(const std::string& sub, const Overrides& o) {
  fracsob::ExperimentConfig cfg = fracsob::ExperimentConfig::load(o.config);
  if (cfg.experiment != sub)
    throw fracsob::ConfigError("config describes a '" + cfg.experiment + "' experiment, not '" + sub + "'");
  if (o.seed) cfg.quad.seed = *o.seed;
  if (o.samples) cfg.quad.samples = *o.samples;
  if (o.out_dir) cfg.out_dir = *o.out_dir;
  cfg.validate();
  const fracsob::ExperimentReport rep = fracsob::run_experiment(cfg);
  const auto files = fracsob::emit_report(rep, cfg.out_dir);
  if (!o.quiet) {
    std::printf("%s: %s (%s)\n", rep.name.c_str(), rep.verdict.c_str(), rep.pass ? "pass" : "fail");
    for (const auto& f : files) std::printf("  wrote %s\n", f.string().c_str());
  }
  return rep.pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fractional Sobolev approximation experiments"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (results do not depend on it)");

  Overrides o;
  const char* subs[][2] = {{"norm", "estimate one norm or seminorm of a field"},
                           {"approx-eval", "extension error at a fixed translation"},
                           {"converge", "best-of-T extension error along an eps schedule"},
                           {"w11-failure", "gradient gap of the extensions of u = x_1"},
                           {"degree", "winding numbers of the vortex, a smooth map and an extension"},
                           {"kernel-check", "stability of the sector kernel bound"},
                           {"pipeline", "Lipschitz approximation of manifold-valued maps"}};
  for (const auto& s : subs) {
    CLI::App* c = app.add_subcommand(s[0], s[1]);
    c->add_option("-c,--config", o.config, "experiment file (JSON)")->required()->check(CLI::ExistingFile);
    c->add_option("--seed", o.seed, "override quadrature.seed");
    c->add_option("--samples", o.samples, "override quadrature.samples");
    c->add_option("--out-dir", o.out_dir, "override out_dir");
    c->add_flag("-q,--quiet", o.quiet, "print nothing on success");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    if (threads > 0) fracsob::set_worker_threads(threads);
    return run(app.get_subcommands().front()->get_name(), o);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
