#include "tomosar/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "tomosar/io.hpp"

namespace tomosar::pipeline {

using json = nlohmann::ordered_json;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::uint64_t file_hash(const std::filesystem::path& p) {
  const std::string bytes = io::read_text_file(p);
  return Hasher().bytes(bytes.data(), bytes.size()).value();
}

json base_manifest(const RunConfig& cfg, const Setup& setup, const char* command) {
  const StageSeeds seeds = stage_seeds(cfg.seed);
  json m;
  m["command"] = command;
  m["tool_version"] = kToolVersion;
  m["format_version"] = io::kFormatVersion;
  m["config_hash"] = hash_hex(cfg.hash());
  m["geometry_hash"] = hash_hex(cfg.geometry.hash());
  m["grid_hash"] = hash_hex(setup.grid.hash());
  m["steering_hash"] = hash_hex(setup.R.hash());
  m["seeds"] = {{"root", cfg.seed},
                {"scene", seeds.scene},
                {"simulation", seeds.simulation},
                {"training", seeds.training}};
  m["wavelength"] = cfg.geometry.wavelength;
  m["carrier_frequency_ghz"] = cfg.geometry.carrier_frequency_ghz ? json(*cfg.geometry.carrier_frequency_ghz) : json();
  m["grid"] = {{"samples", setup.grid.size()},
               {"min", setup.grid.front()},
               {"max", setup.grid.back()},
               {"spacing", setup.grid.spacing()}};
  return m;
}

void write_manifest(const std::filesystem::path& artifact, json m,
                    const std::vector<std::filesystem::path>& artifacts) {
  json files = json::object();
  for (const auto& p : artifacts) files[p.filename().string()] = hash_hex(file_hash(p));
  m["artifacts"] = files;
  std::filesystem::path path = artifact;
  path.replace_extension(".manifest.json");
  io::write_text_file(path, m.dump(2) + "\n");
}

void check_config_hash(std::uint64_t found, const RunConfig& cfg, const std::filesystem::path& path) {
  if (found != cfg.hash())
    throw ValidationError(path.string() + " was produced under config " + hash_hex(found) +
                          " but the current config hashes to " + hash_hex(cfg.hash()) +
                          "; regenerate it with this config");
}

SampleSet load_dataset(const RunConfig& cfg, const Setup& setup, const std::filesystem::path& path) {
  std::uint64_t h = 0;
  SampleSet set = io::read_dataset(path, &h);
  check_config_hash(h, cfg, path);
  if (set.geometry_hash != cfg.geometry.hash() || set.grid_hash != setup.grid.hash())
    throw ValidationError(path.string() + ": dataset geometry/grid hashes do not match the config");
  return set;
}

AnalyticWeights load_weights(const RunConfig& cfg, const Setup& setup, const std::filesystem::path& path) {
  io::MatrixFile f = io::read_matrix(path);
  if (f.kind != io::MatrixKind::Weights) throw ValidationError(path.string() + ": not a weights file");
  check_config_hash(f.config_hash, cfg, path);
  if (f.steering_hash != setup.R.hash())
    throw ValidationError(path.string() + ": weights belong to steering matrix " + hash_hex(f.steering_hash) +
                          ", expected " + hash_hex(setup.R.hash()));
  AnalyticWeights w{std::move(f.entries), f.steering_hash, f.objective_value};
  const double violation = w.constraint_violation(setup.R);
  if (!(violation < 1e-8))
    throw ValidationError(path.string() + ": weights violate the unit-diagonal constraint by " + num(violation));
  return w;
}

AlistaModel load_model(const RunConfig& cfg, const Setup& setup, const std::filesystem::path& path) {
  std::uint64_t h = 0;
  AlistaModel m = io::read_model(path, setup.R, &h);
  check_config_hash(h, cfg, path);
  return m;
}

std::vector<const Measurement*> measurements(const SampleSet& set) {
  std::vector<const Measurement*> ys;
  for (const auto& s : set.samples) ys.push_back(&s.measurement);
  return ys;
}

}  // namespace

Setup make_setup(const RunConfig& cfg) {
  cfg.validate();
  ElevationGrid grid = cfg.elevation_grid();
  SteeringMatrix R = build_steering_matrix(cfg.geometry, grid);
  return {std::move(grid), std::move(R)};
}

SampleSet simulate(const RunConfig& cfg, const Setup& setup) {
  const Scene scene = generate_scene(cfg.scene, setup.grid, cfg.geometry.look_angle_deg);
  SampleSetOptions opt = cfg.simulation;
  return build_sample_set(scene, cfg.geometry, setup.grid, opt);
}

std::string model_name(const AlistaModel& model) {
  return model.record.label_provenance == Labeling::GroundTruth ? "alista-gt" : "alista-iht";
}

SolverSpec make_solver(const RunConfig& cfg, SolverKind kind, const AlistaModel* model) {
  SolverSpec s;
  s.kind = kind;
  s.ista = cfg.ista;
  s.greedy = kind == SolverKind::Omp ? cfg.omp : cfg.iht;
  s.model = model;
  s.name = kind == SolverKind::Alista && model ? model_name(*model) : to_string(kind);
  return s;
}

void cmd_simulate(const RunConfig& cfg, const std::filesystem::path& dataset_out, std::ostream& log) {
  const Setup setup = make_setup(cfg);
  const SampleSet set = simulate(cfg, setup);
  io::write_dataset(dataset_out, set, cfg.hash());

  json m = base_manifest(cfg, setup, "simulate");
  m["labeling"] = to_string(set.labeling);
  m["snr_db"] = std::isfinite(cfg.simulation.snr_db) ? json(cfg.simulation.snr_db) : json("inf");
  m["channels"] = cfg.geometry.num_channels();
  m["samples"] = {{"total", set.samples.size()},
                  {"train", set.count(Split::Train)},
                  {"validation", set.count(Split::Validation)},
                  {"test", set.count(Split::Test)}};
  auto config_copy = dataset_out;
  config_copy.replace_extension(".config.json");
  io::write_text_file(config_copy, cfg.canonical_json() + "\n");
  write_manifest(dataset_out, m, {dataset_out, config_copy});

  log << "simulate: " << set.samples.size() << " pixels (" << set.count(Split::Train) << " train, "
      << set.count(Split::Validation) << " validation, " << set.count(Split::Test) << " test), N="
      << cfg.geometry.num_channels() << ", L=" << setup.grid.size() << ", labeling " << to_string(set.labeling)
      << " -> " << dataset_out.string() << "\n";
}

void cmd_precompute(const RunConfig& cfg, const std::filesystem::path& steering_out,
                    const std::filesystem::path& weights_out, std::ostream& log) {
  const Setup setup = make_setup(cfg);
  const AnalyticWeights w = compute_analytic_weights(setup.R);
  io::write_matrix(steering_out, {io::MatrixKind::Steering, setup.R.entries(), setup.R.hash(), cfg.hash(), 0.0});
  io::write_matrix(weights_out, {io::MatrixKind::Weights, w.entries, setup.R.hash(), cfg.hash(), w.objective_value});

  json m = base_manifest(cfg, setup, "precompute");
  m["constraint"] = kWeightConstraint;
  m["objective_value"] = w.objective_value;
  m["constraint_violation"] = w.constraint_violation(setup.R);
  m["lambda_max"] = setup.R.lambda_max();
  write_manifest(weights_out, m, {steering_out, weights_out});

  log << "precompute: R " << setup.R.rows() << "x" << setup.R.cols() << " (hash " << hash_hex(setup.R.hash())
      << "), ||W^H R||_F^2 = " << num(w.objective_value) << " -> " << steering_out.string() << ", "
      << weights_out.string() << "\n";
}

void cmd_train(const RunConfig& cfg, const std::filesystem::path& dataset, const std::filesystem::path& weights,
               const std::filesystem::path& model_out, const std::filesystem::path& curve_out, std::ostream& log) {
  const Setup setup = make_setup(cfg);
  const SampleSet set = load_dataset(cfg, setup, dataset);
  const AnalyticWeights w = load_weights(cfg, setup, weights);
  const AlistaModel model = train(set, setup.R, w, cfg.alista.layers, cfg.alista.train);
  io::write_model(model_out, model, cfg.hash());

  std::string csv = "epoch,train_loss,validation_loss\n";
  for (std::size_t e = 0; e < model.record.train_loss.size(); ++e)
    csv += std::to_string(e + 1) + "," + num(model.record.train_loss[e]) + "," +
           num(model.record.validation_loss[e]) + "\n";
  io::write_text_file(curve_out, csv);

  json m = base_manifest(cfg, setup, "train");
  m["layers"] = model.layers();
  m["tied"] = model.tied;
  m["loss"] = to_string(model.loss);
  m["optimizer"] = to_string(cfg.alista.train.optimizer);
  m["label_provenance"] = to_string(model.record.label_provenance);
  m["best_epoch"] = model.record.best_epoch;
  m["theta"] = model.theta;
  m["eta"] = model.eta;
  write_manifest(model_out, m, {model_out, curve_out});

  log << "train: " << model.layers() << " layers, best epoch " << model.record.best_epoch << " of "
      << model.record.validation_loss.size() << ", validation loss "
      << num(model.record.validation_loss[static_cast<std::size_t>(model.record.best_epoch - 1)]) << " -> "
      << model_out.string() << "\n";
}

void cmd_sweep_layers(const RunConfig& cfg, const std::filesystem::path& dataset,
                      const std::filesystem::path& weights, const std::filesystem::path& curve_out,
                      std::ostream& log) {
  const Setup setup = make_setup(cfg);
  const SampleSet set = load_dataset(cfg, setup, dataset);
  const AnalyticWeights w = load_weights(cfg, setup, weights);
  TrainConfig tc = cfg.alista.train;
  tc.layer_schedule.clear();
  const auto curve = sweep_layers(set, setup.R, w, cfg.alista.sweep_first, cfg.alista.sweep_last, tc);
  std::string csv = "layers,validation_nmse_db,validation_loss\n";
  for (const auto& p : curve) {
    csv += std::to_string(p.layers) + "," + num(p.validation_nmse_db) + "," + num(p.validation_loss) + "\n";
    log << "sweep: K=" << p.layers << " validation NMSE " << num(p.validation_nmse_db) << " (-dB)\n";
  }
  io::write_text_file(curve_out, csv);
}

std::filesystem::path cmd_reconstruct(const RunConfig& cfg, const std::filesystem::path& dataset,
                                      SolverKind solver, const std::optional<std::filesystem::path>& model_path,
                                      const std::filesystem::path& out_dir, std::ostream& log) {
  const Setup setup = make_setup(cfg);
  if (solver == SolverKind::Alista && !model_path)
    throw ValidationError("reconstruct: solver alista requires --model");
  const SampleSet set = load_dataset(cfg, setup, dataset);
  std::optional<AlistaModel> model;
  if (model_path) model = load_model(cfg, setup, *model_path);
  const SolverSpec spec = make_solver(cfg, solver, model ? &*model : nullptr);

  const auto est = reconstruct_all(spec, measurements(set), setup.R, cfg.workers);
  io::EstimatesFile file{spec.name, cfg.hash(), setup.grid.hash(), {}};
  for (std::size_t i = 0; i < est.size(); ++i) {
    if (!est[i].allFinite())
      throw NumericalError("reconstruct: non-finite estimate at pixel (" + std::to_string(set.samples[i].coord.azimuth) +
                           ", " + std::to_string(set.samples[i].coord.range) + ")");
    file.estimates.push_back({set.samples[i].coord, est[i]});
  }
  const Layout layout{out_dir};
  const auto est_path = layout.estimates(spec.name);
  io::write_estimates(est_path, file);

  const PointCloud cloud =
      to_point_cloud(file.estimates, setup.grid, cfg.geometry, cfg.scene.pixel_spacing, cfg.eval.detection_threshold);
  std::ostringstream xyz, ply;
  write_xyz(xyz, cloud);
  write_ply(ply, cloud);
  const auto xyz_path = out_dir / ("cloud_" + spec.name + ".xyz");
  const auto ply_path = out_dir / ("cloud_" + spec.name + ".ply");
  io::write_text_file(xyz_path, xyz.str());
  io::write_text_file(ply_path, ply.str());

  json m = base_manifest(cfg, setup, "reconstruct");
  m["solver"] = spec.name;
  m["iteration_budget"] = spec.iteration_budget();
  m["pixels"] = file.estimates.size();
  m["points"] = cloud.points.size();
  m["detection_threshold"] = cfg.eval.detection_threshold;
  write_manifest(est_path, m, {est_path, xyz_path, ply_path});

  log << "reconstruct: " << spec.name << " on " << file.estimates.size() << " pixels, " << cloud.points.size()
      << " points -> " << est_path.string() << "\n";
  return est_path;
}

std::vector<NmseReport> cmd_eval(const RunConfig& cfg, const std::filesystem::path& dataset,
                                 const std::vector<std::string>& estimates,
                                 const std::filesystem::path& report_out, std::ostream& out) {
  const Setup setup = make_setup(cfg);
  if (estimates.empty()) throw ValidationError("eval: no estimates given");
  const SampleSet set = load_dataset(cfg, setup, dataset);
  const auto pixels = set.subset(cfg.eval.split);
  if (pixels.empty()) throw ValidationError("eval: dataset has no " + to_string(cfg.eval.split) + " pixels");
  std::vector<Profile> truths;
  for (const auto* s : pixels) truths.push_back(s->truth);

  std::vector<NmseReport> reports;
  for (const auto& e : estimates) {
    std::vector<Profile> est;
    std::string name;
    if (e == "truth") {
      est = truths;
      name = "truth";
    } else {
      const io::EstimatesFile f = io::read_estimates(e);
      check_config_hash(f.config_hash, cfg, e);
      if (f.grid_hash != setup.grid.hash()) throw ValidationError(e + ": estimates were made on a different grid");
      std::map<PixelCoord, const Profile*> by_coord;
      for (const auto& p : f.estimates) by_coord[p.coord] = &p.estimate;
      for (const auto* s : pixels) {
        auto it = by_coord.find(s->coord);
        if (it == by_coord.end())
          throw ValidationError(e + ": no estimate for pixel (" + std::to_string(s->coord.azimuth) + ", " +
                                std::to_string(s->coord.range) + ")");
        est.push_back(*it->second);
      }
      name = f.solver;
    }
    NmseReport r = nmse_db(est, truths, cfg.eval.nmse_mode);
    r.solver = name;
    reports.push_back(std::move(r));
  }

  print_nmse_table(out, reports);
  const std::string ordering = nmse_ordering(reports);
  out << ordering << "\n";

  json doc;
  doc["config_hash"] = hash_hex(cfg.hash());
  doc["split"] = to_string(cfg.eval.split);
  doc["nmse_mode"] = to_string(cfg.eval.nmse_mode);
  doc["units"] = "-10 log10(sum |est - truth|^2 / sum |truth|^2)";
  json rows = json::array();
  for (const auto& r : reports) {
    json per_pixel = json::array();
    for (double v : r.per_pixel_db) per_pixel.push_back(finite_or_null(v));
    rows.push_back({{"solver", r.solver},
                    {"nmse_db", r.aggregate_db},
                    {"nmse_ratio", r.aggregate_ratio},
                    {"pixels", r.count},
                    {"numerators", r.numerators},
                    {"denominators", r.denominators},
                    {"per_pixel_db", per_pixel}});
  }
  doc["solvers"] = rows;
  doc["ordering"] = ordering;
  io::write_text_file(report_out, doc.dump(2) + "\n");
  return reports;
}

std::vector<BenchReport> cmd_bench(const RunConfig& cfg, const std::filesystem::path& dataset,
                                   const std::vector<SolverKind>& solvers,
                                   const std::vector<std::filesystem::path>& model_paths,
                                   const std::filesystem::path& report_out, std::ostream& out) {
  const Setup setup = make_setup(cfg);
  if (solvers.empty()) throw ValidationError("bench: no solvers given");
  const SampleSet set = load_dataset(cfg, setup, dataset);
  std::vector<AlistaModel> models;
  for (const auto& p : model_paths) models.push_back(load_model(cfg, setup, p));

  std::vector<SolverSpec> specs;
  for (SolverKind k : solvers) {
    if (k != SolverKind::Alista) {
      specs.push_back(make_solver(cfg, k));
      continue;
    }
    if (models.empty()) throw ValidationError("bench: solver alista requires --model");
    for (const auto& m : models) specs.push_back(make_solver(cfg, k, &m));
  }

  const auto pixels = set.subset(cfg.eval.split);
  std::vector<const Measurement*> ys;
  for (const auto* s : pixels) ys.push_back(&s->measurement);

  std::vector<BenchReport> reports;
  for (const auto& s : specs) reports.push_back(benchmark(s, ys, setup.R, cfg.eval.bench_repetitions, cfg.workers));
  print_bench_table(out, reports);

  json doc;
  doc["config_hash"] = hash_hex(cfg.hash());
  doc["split"] = to_string(cfg.eval.split);
  json rows = json::array();
  for (const auto& r : reports)
    rows.push_back({{"solver", r.solver},
                    {"total_seconds", r.total_seconds},
                    {"lane_seconds", r.lane_seconds},
                    {"pixels", r.pixels},
                    {"per_pixel_mean", r.per_pixel_mean},
                    {"per_pixel_median", r.per_pixel_median},
                    {"iteration_budget", r.iteration_budget},
                    {"repetitions", r.repetitions},
                    {"workers", r.workers}});
  doc["solvers"] = rows;
  io::write_text_file(report_out, doc.dump(2) + "\n");
  return reports;
}

}  // namespace tomosar::pipeline
