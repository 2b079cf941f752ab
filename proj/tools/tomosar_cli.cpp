#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tomosar/config.hpp"
#include "tomosar/pipeline.hpp"

namespace fs = std::filesystem;
using namespace tomosar;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string out_dir;

  RunConfig load() const {
    RunConfig cfg = config.empty() ? parse_config("{}", overrides) : load_config(config, overrides);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    return cfg;
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "JSON run configuration (defaults when omitted)");
  cmd->add_option("--set", c.overrides, "Override a config key, e.g. --set alista.layers=12");
  cmd->add_option("-o,--out-dir", c.out_dir, "Output directory (overrides io.output_dir)");
}

std::vector<SolverKind> parse_solvers(const std::vector<std::string>& names) {
  std::vector<SolverKind> out;
  for (const auto& n : names) out.push_back(solver_kind_from_string(n));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TomoSAR elevation reconstruction: classical sparse solvers and ALISTA"};
  app.require_subcommand(1);

  Common common;
  std::string dataset, weights, steering, model, output;
  std::vector<std::string> models, estimates, solvers;
  std::string solver;

  auto* sim = app.add_subcommand("simulate", "Generate the synthetic scene and labelled sample set");
  add_common(sim, common);
  sim->add_option("--dataset", output, "Dataset output path");

  auto* pre = app.add_subcommand("precompute", "Build the steering matrix and analytic weights");
  add_common(pre, common);
  pre->add_option("--steering", steering, "Steering matrix output path");
  pre->add_option("--weights", weights, "Weights output path");

  auto* trn = app.add_subcommand("train", "Train the ALISTA threshold and step scalars");
  add_common(trn, common);
  trn->add_option("--dataset", dataset, "Dataset path");
  trn->add_option("--weights", weights, "Weights path");
  trn->add_option("--model", output, "Model output path");

  auto* swp = app.add_subcommand("sweep-layers", "Train one model per depth and report validation NMSE");
  add_common(swp, common);
  swp->add_option("--dataset", dataset, "Dataset path");
  swp->add_option("--weights", weights, "Weights path");
  swp->add_option("--output", output, "Curve CSV output path");

  auto* rec = app.add_subcommand("reconstruct", "Reconstruct every pixel and export point clouds");
  add_common(rec, common);
  rec->add_option("--dataset", dataset, "Dataset path");
  rec->add_option("--solver", solver, "omp, iht, ista or alista")->required();
  rec->add_option("--model", model, "Trained model (alista only)");

  auto* evl = app.add_subcommand("eval", "NMSE table for one or more estimates files");
  add_common(evl, common);
  evl->add_option("--dataset", dataset, "Dataset path");
  evl->add_option("--estimates", estimates, "Estimates files, or 'truth'")->required();
  evl->add_option("--report", output, "Report output path");

  auto* bch = app.add_subcommand("bench", "Time solvers on the evaluation split");
  add_common(bch, common);
  bch->add_option("--dataset", dataset, "Dataset path");
  bch->add_option("--solvers", solvers, "Solvers to time")->delimiter(',')->required();
  bch->add_option("--model", models, "Trained models for alista");
  bch->add_option("--report", output, "Report output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const RunConfig cfg = common.load();
    const pipeline::Layout layout{cfg.output_dir};
    auto or_default = [](const std::string& s, const fs::path& d) { return s.empty() ? d : fs::path(s); };
    fs::create_directories(cfg.output_dir);

    if (*sim) {
      pipeline::cmd_simulate(cfg, or_default(output, layout.dataset()), std::cout);
    } else if (*pre) {
      pipeline::cmd_precompute(cfg, or_default(steering, layout.steering()), or_default(weights, layout.weights()),
                               std::cout);
    } else if (*trn) {
      const fs::path model_out = or_default(output, layout.model());
      fs::path curve = model_out;
      curve.replace_filename(model_out.stem().string() + "_loss_curve.csv");
      if (output.empty()) curve = layout.loss_curve();
      pipeline::cmd_train(cfg, or_default(dataset, layout.dataset()), or_default(weights, layout.weights()),
                          model_out, curve, std::cout);
    } else if (*swp) {
      pipeline::cmd_sweep_layers(cfg, or_default(dataset, layout.dataset()), or_default(weights, layout.weights()),
                                 or_default(output, layout.sweep()), std::cout);
    } else if (*rec) {
      const SolverKind kind = solver_kind_from_string(solver);
      std::optional<fs::path> m;
      if (!model.empty()) m = model;
      pipeline::cmd_reconstruct(cfg, or_default(dataset, layout.dataset()), kind, m, cfg.output_dir, std::cout);
    } else if (*evl) {
      pipeline::cmd_eval(cfg, or_default(dataset, layout.dataset()), estimates, or_default(output, layout.eval_report()),
                         std::cout);
    } else if (*bch) {
      std::vector<fs::path> mp(models.begin(), models.end());
      pipeline::cmd_bench(cfg, or_default(dataset, layout.dataset()), parse_solvers(solvers), mp,
                          or_default(output, layout.bench_report()), std::cout);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
