#include "tomosar/config.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "tomosar/io.hpp"

namespace tomosar {

using json = nlohmann::json;

namespace {

json snr_to_json(double snr) {
  if (std::isinf(snr) && snr > 0) return "inf";
  return snr;
}

json opt_to_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "validation") return Split::Validation;
  if (s == "test") return Split::Test;
  throw ValidationError("unknown split '" + s + "' (expected train, validation or test)");
}

std::string gradient_mode_name(GradientMode m) { return m == GradientMode::Analytic ? "analytic" : "finite_difference"; }

GradientMode gradient_mode_from_string(const std::string& s) {
  if (s == "analytic") return GradientMode::Analytic;
  if (s == "finite_difference") return GradientMode::FiniteDifference;
  throw ValidationError("unknown gradient mode '" + s + "' (expected analytic or finite_difference)");
}

json to_json(const RunConfig& c, int num_channels, double baseline_interval) {
  json geometry{
      {"num_channels", num_channels},
      {"baseline_interval", baseline_interval},
      {"baselines", nullptr},
      {"wavelength", c.geometry.wavelength},
      {"carrier_frequency_ghz", opt_to_json(c.geometry.carrier_frequency_ghz)},
      {"slant_range", c.geometry.slant_range},
      {"look_angle_deg", c.geometry.look_angle_deg},
  };
  const auto& s = c.scene;
  const auto& t = c.alista.train;
  return json{
      {"schema_version", kConfigSchemaVersion},
      {"seed", c.seed},
      {"workers", c.workers},
      {"geometry", geometry},
      {"grid",
       {{"samples", c.grid.samples}, {"min", opt_to_json(c.grid.min)}, {"max", opt_to_json(c.grid.max)},
        {"margin", c.grid.margin}}},
      {"scene",
       {{"azimuth_extent", s.azimuth_extent},
        {"range_extent", s.range_extent},
        {"pixel_spacing", s.pixel_spacing},
        {"building_height", s.building_height},
        {"building_azimuth_start", s.building_azimuth_start},
        {"building_azimuth_end", s.building_azimuth_end},
        {"facade_range_pixel", s.facade_range_pixel},
        {"building_depth", s.building_depth},
        {"include_roof", s.include_roof},
        {"facade_amplitude", s.facade_amplitude},
        {"ground_amplitude", s.ground_amplitude},
        {"roof_amplitude", s.roof_amplitude},
        {"amplitude_jitter", s.amplitude_jitter},
        {"max_scatterers_per_pixel", s.max_scatterers_per_pixel}}},
      {"simulation",
       {{"snr_db", snr_to_json(c.simulation.snr_db)},
        {"labeling", to_string(c.simulation.labeling)},
        {"validation_fraction", c.simulation.split.validation},
        {"test_fraction", c.simulation.split.test},
        {"label_max_residual", c.simulation.criteria.max_residual},
        {"label_min_peak_ratio", c.simulation.criteria.min_peak_ratio},
        {"label_sparsity", c.simulation.label_sparsity},
        {"label_iterations", c.simulation.label_iterations}}},
      {"ista",
       {{"alpha", c.ista.alpha},
        {"lipschitz", c.ista.lipschitz},
        {"max_iters", c.ista.max_iters},
        {"tolerance", c.ista.tolerance}}},
      {"omp",
       {{"sparsity", c.omp.sparsity},
        {"max_iters", c.omp.max_iters},
        {"residual_tolerance", c.omp.residual_tolerance}}},
      {"iht",
       {{"sparsity", c.iht.sparsity},
        {"max_iters", c.iht.max_iters},
        {"residual_tolerance", c.iht.residual_tolerance},
        {"lipschitz", c.iht.lipschitz}}},
      {"alista",
       {{"layers", c.alista.layers},
        {"learning_rate", t.learning_rate},
        {"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"optimizer", to_string(t.optimizer)},
        {"momentum", t.momentum},
        {"tied", t.tied},
        {"loss", to_string(t.loss)},
        {"gradient_mode", gradient_mode_name(t.gradient_mode)},
        {"validation_fraction", t.validation_fraction},
        {"layer_schedule", t.layer_schedule},
        {"sweep_first", c.alista.sweep_first},
        {"sweep_last", c.alista.sweep_last}}},
      {"eval",
       {{"detection_threshold", c.eval.detection_threshold},
        {"bench_repetitions", c.eval.bench_repetitions},
        {"nmse_mode", to_string(c.eval.nmse_mode)},
        {"split", to_string(c.eval.split)}}},
      {"io", {{"output_dir", c.output_dir.string()}}},
  };
}

// Keys whose default is null accept a value of another type.
void overlay(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) throw ValidationError("config: '" + (prefix.empty() ? "<root>" : prefix) + "' must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string name = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw ValidationError("config: unknown key '" + name + "'");
    json& slot = base[key];
    if (slot.is_object()) {
      overlay(slot, value, name);
    } else {
      slot = value;
    }
  }
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ValidationError("override '" + assignment + "' must look like key.path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json* node = &doc;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!node->is_object() || !node->contains(part)) throw ValidationError("config: unknown key '" + path + "'");
    node = &(*node)[part];
  }
  if (node->is_object()) throw ValidationError("override '" + path + "' names a section, not a key");
  json value = json::parse(raw, nullptr, false);
  *node = value.is_discarded() ? json(raw) : value;
}

class Extractor {
 public:
  explicit Extractor(const json& doc) : doc_(doc) {}

  template <class T>
  T get(const std::string& path) const {
    const json& node = at(path);
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!node.is_number()) throw ValidationError("");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!node.is_number_integer()) throw ValidationError("");
        if constexpr (std::is_unsigned_v<T>) {
          if (node.is_number_integer() && !node.is_number_unsigned() && node.get<std::int64_t>() < 0)
            throw ValidationError("");
        }
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!node.is_boolean()) throw ValidationError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!node.is_string()) throw ValidationError("");
      }
      return node.get<T>();
    } catch (const std::exception&) {
      throw ValidationError("config key '" + path + "': expected " + type_name<T>() + ", got " + node.dump());
    }
  }

  std::optional<double> optional_double(const std::string& path) const {
    if (at(path).is_null()) return std::nullopt;
    return get<double>(path);
  }

  double snr(const std::string& path) const {
    const json& node = at(path);
    if (node.is_string() && node.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    return get<double>(path);
  }

  template <class T>
  std::vector<T> list(const std::string& path) const {
    const json& node = at(path);
    if (node.is_null()) return {};
    if (!node.is_array()) throw ValidationError("config key '" + path + "': expected a list");
    std::vector<T> out;
    for (std::size_t i = 0; i < node.size(); ++i) {
      const json& v = node[i];
      if (!(std::is_floating_point_v<T> ? v.is_number() : v.is_number_integer()))
        throw ValidationError("config key '" + path + "': element " + std::to_string(i) + " has the wrong type");
      out.push_back(v.get<T>());
    }
    return out;
  }

  const json& at(const std::string& path) const {
    const json* node = &doc_;
    std::stringstream ss(path);
    std::string part;
    while (std::getline(ss, part, '.')) node = &node->at(part);
    return *node;
  }

 private:
  template <class T>
  static std::string type_name() {
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    else if constexpr (std::is_same_v<T, std::string>) return "a string";
    else if constexpr (std::is_unsigned_v<T>) return "a nonnegative integer";
    else if constexpr (std::is_integral_v<T>) return "an integer";
    else return "a number";
  }

  const json& doc_;
};

// Wraps enum parsers so their errors name the key.
template <class Fn>
auto named(const std::string& key, Fn&& fn) {
  try {
    return fn();
  } catch (const ValidationError& e) {
    throw ValidationError("config key '" + key + "': " + e.what());
  }
}

RunConfig from_json(const json& doc) {
  Extractor x(doc);
  if (x.get<int>("schema_version") != kConfigSchemaVersion)
    throw ValidationError("config key 'schema_version': unsupported version " + x.at("schema_version").dump());
  RunConfig c;
  c.seed = x.get<std::uint64_t>("seed");
  c.workers = x.get<int>("workers");

  const auto baselines = x.list<double>("geometry.baselines");
  const int n = x.get<int>("geometry.num_channels");
  const double wavelength = x.get<double>("geometry.wavelength");
  const double range = x.get<double>("geometry.slant_range");
  const double look = x.get<double>("geometry.look_angle_deg");
  if (baselines.empty()) {
    if (n < 2) throw ValidationError("config key 'geometry.num_channels' must be >= 2");
    c.geometry = AcquisitionGeometry::uniform_array(n, x.get<double>("geometry.baseline_interval"), wavelength, range,
                                                    look);
  } else {
    c.geometry.baselines = baselines;
    c.geometry.wavelength = wavelength;
    c.geometry.slant_range = range;
    c.geometry.look_angle_deg = look;
    if (static_cast<int>(baselines.size()) != n)
      throw ValidationError("config key 'geometry.baselines': " + std::to_string(baselines.size()) +
                            " entries but geometry.num_channels is " + std::to_string(n));
  }
  c.geometry.carrier_frequency_ghz = x.optional_double("geometry.carrier_frequency_ghz");

  c.grid.samples = x.get<int>("grid.samples");
  c.grid.min = x.optional_double("grid.min");
  c.grid.max = x.optional_double("grid.max");
  c.grid.margin = x.get<double>("grid.margin");

  auto& s = c.scene;
  s.azimuth_extent = x.get<int>("scene.azimuth_extent");
  s.range_extent = x.get<int>("scene.range_extent");
  s.pixel_spacing = x.get<double>("scene.pixel_spacing");
  s.building_height = x.get<double>("scene.building_height");
  s.building_azimuth_start = x.get<int>("scene.building_azimuth_start");
  s.building_azimuth_end = x.get<int>("scene.building_azimuth_end");
  s.facade_range_pixel = x.get<int>("scene.facade_range_pixel");
  s.building_depth = x.get<double>("scene.building_depth");
  s.include_roof = x.get<bool>("scene.include_roof");
  s.facade_amplitude = x.get<double>("scene.facade_amplitude");
  s.ground_amplitude = x.get<double>("scene.ground_amplitude");
  s.roof_amplitude = x.get<double>("scene.roof_amplitude");
  s.amplitude_jitter = x.get<double>("scene.amplitude_jitter");
  s.max_scatterers_per_pixel = x.get<int>("scene.max_scatterers_per_pixel");

  auto& sim = c.simulation;
  sim.snr_db = x.snr("simulation.snr_db");
  sim.labeling = named("simulation.labeling", [&] { return labeling_from_string(x.get<std::string>("simulation.labeling")); });
  sim.split.validation = x.get<double>("simulation.validation_fraction");
  sim.split.test = x.get<double>("simulation.test_fraction");
  sim.criteria.max_residual = x.get<double>("simulation.label_max_residual");
  sim.criteria.min_peak_ratio = x.get<double>("simulation.label_min_peak_ratio");
  sim.label_sparsity = x.get<int>("simulation.label_sparsity");
  sim.label_iterations = x.get<int>("simulation.label_iterations");

  c.ista.alpha = x.get<double>("ista.alpha");
  c.ista.lipschitz = x.get<double>("ista.lipschitz");
  c.ista.max_iters = x.get<int>("ista.max_iters");
  c.ista.tolerance = x.get<double>("ista.tolerance");

  c.omp.sparsity = x.get<int>("omp.sparsity");
  c.omp.max_iters = x.get<int>("omp.max_iters");
  c.omp.residual_tolerance = x.get<double>("omp.residual_tolerance");

  c.iht.sparsity = x.get<int>("iht.sparsity");
  c.iht.max_iters = x.get<int>("iht.max_iters");
  c.iht.residual_tolerance = x.get<double>("iht.residual_tolerance");
  c.iht.lipschitz = x.get<double>("iht.lipschitz");

  auto& t = c.alista.train;
  c.alista.layers = x.get<int>("alista.layers");
  t.learning_rate = x.get<double>("alista.learning_rate");
  t.epochs = x.get<int>("alista.epochs");
  t.batch_size = x.get<int>("alista.batch_size");
  t.optimizer = named("alista.optimizer", [&] { return optimizer_from_string(x.get<std::string>("alista.optimizer")); });
  t.momentum = x.get<double>("alista.momentum");
  t.tied = x.get<bool>("alista.tied");
  t.loss = named("alista.loss", [&] { return loss_kind_from_string(x.get<std::string>("alista.loss")); });
  t.gradient_mode =
      named("alista.gradient_mode", [&] { return gradient_mode_from_string(x.get<std::string>("alista.gradient_mode")); });
  t.validation_fraction = x.get<double>("alista.validation_fraction");
  t.layer_schedule = x.list<int>("alista.layer_schedule");
  c.alista.sweep_first = x.get<int>("alista.sweep_first");
  c.alista.sweep_last = x.get<int>("alista.sweep_last");

  c.eval.detection_threshold = x.get<double>("eval.detection_threshold");
  c.eval.bench_repetitions = x.get<int>("eval.bench_repetitions");
  c.eval.nmse_mode = named("eval.nmse_mode", [&] { return nmse_mode_from_string(x.get<std::string>("eval.nmse_mode")); });
  c.eval.split = named("eval.split", [&] { return split_from_string(x.get<std::string>("eval.split")); });

  c.output_dir = x.get<std::string>("io.output_dir");

  const StageSeeds seeds = stage_seeds(c.seed);
  c.scene.random_seed = seeds.scene;
  c.simulation.seed = seeds.simulation;
  c.alista.train.seed = seeds.training;
  c.simulation.workers = c.workers;
  c.alista.train.workers = c.workers;
  c.validate();
  return c;
}

}  // namespace

// Geometry is re-expressed as an explicit baseline list in the canonical
// form, so uniform and explicit spellings of the same array hash alike.
std::string RunConfig::canonical_json() const {
  json doc = to_json(*this, geometry.num_channels(), 0.0);
  doc["geometry"]["baselines"] = geometry.baselines;
  doc["geometry"].erase("baseline_interval");
  return doc.dump(2);
}

std::uint64_t RunConfig::hash() const {
  json doc = json::parse(canonical_json());
  doc.erase("io");
  doc.erase("workers");
  doc["simulation"].erase("labeling");
  return Hasher().str(doc.dump()).value();
}

ElevationGrid RunConfig::elevation_grid() const {
  if (grid.samples < 2) throw ValidationError("config key 'grid.samples' must be >= 2");
  if (grid.min.has_value() != grid.max.has_value())
    throw ValidationError("config keys 'grid.min' and 'grid.max' must be given together");
  if (grid.min) {
    if (!(*grid.max > *grid.min)) throw ValidationError("config key 'grid.max' must exceed grid.min");
    return ElevationGrid::spanning(*grid.min, *grid.max, grid.samples);
  }
  if (grid.margin < 0.0) throw ValidationError("config key 'grid.margin' must be >= 0");
  double top = scene.has_building() ? scene.max_elevation(geometry.look_angle_deg) : 0.0;
  if (top <= 0.0) top = 1.0;
  // Same extent as [-margin/2, 1 + margin/2] * top, shifted so that ground
  // (elevation 0) falls on a sample.
  const double spacing = (1.0 + grid.margin) * top / (grid.samples - 1);
  const double below = std::round(0.5 * grid.margin * top / spacing);
  return ElevationGrid::uniform(-below * spacing, spacing, grid.samples);
}

void RunConfig::validate() const {
  auto wrap = [](const char* section, auto&& fn) {
    try {
      fn();
    } catch (const ValidationError& e) {
      throw ValidationError(std::string("config section '") + section + "': " + e.what());
    }
  };
  if (workers < 0) throw ValidationError("config key 'workers' must be >= 0");
  wrap("geometry", [&] { geometry.validate(); });
  wrap("scene", [&] { scene.validate(); });
  const ElevationGrid g = elevation_grid();
  if (scene.has_building()) {
    const double top = scene.max_elevation(geometry.look_angle_deg);
    if (!g.contains(top))
      throw ValidationError("config key 'scene.building_height': building reaches elevation " + std::to_string(top) +
                            " m, beyond the grid extent [" + std::to_string(g.front()) + ", " +
                            std::to_string(g.back()) + "]");
  }
  if (!g.contains(0.0)) throw ValidationError("config key 'grid.min': grid must contain elevation 0 (ground)");
  if (!(simulation.snr_db > -100.0)) throw ValidationError("config key 'simulation.snr_db' is out of range");
  if (simulation.split.validation < 0 || simulation.split.test < 0 ||
      simulation.split.validation + simulation.split.test >= 1.0)
    throw ValidationError("config keys 'simulation.validation_fraction' + 'simulation.test_fraction' must lie in [0, 1)");
  if (simulation.criteria.max_residual < 0 || simulation.criteria.min_peak_ratio < 1.0)
    throw ValidationError("config: label criteria need max_residual >= 0 and min_peak_ratio >= 1");
  if (simulation.label_sparsity < 1 || simulation.label_iterations < simulation.label_sparsity)
    throw ValidationError("config keys 'simulation.label_sparsity'/'label_iterations' are inconsistent");
  if (!(ista.alpha > 0.0)) throw ValidationError("config key 'ista.alpha' must be positive");
  if (ista.max_iters < 1) throw ValidationError("config key 'ista.max_iters' must be >= 1");
  if (ista.tolerance < 0.0) throw ValidationError("config key 'ista.tolerance' must be >= 0");
  if (ista.lipschitz < 0.0 || iht.lipschitz < 0.0)
    throw ValidationError("config: lipschitz must be 0 (automatic) or positive");
  const int n = geometry.num_channels();
  const int l = g.size();
  for (auto [name, gc] : {std::pair{"omp", &omp}, std::pair{"iht", &iht}}) {
    if (gc->sparsity < 1 || gc->sparsity > std::min(n, l))
      throw ValidationError(std::string("config key '") + name + ".sparsity' must lie in [1, min(N, L)]");
    if (gc->max_iters < gc->sparsity)
      throw ValidationError(std::string("config key '") + name + ".max_iters' must be >= sparsity");
    if (gc->residual_tolerance < 0.0)
      throw ValidationError(std::string("config key '") + name + ".residual_tolerance' must be >= 0");
  }
  if (alista.layers < 1) throw ValidationError("config key 'alista.layers' must be >= 1");
  wrap("alista", [&] { alista.train.validate(); });
  if (!alista.train.layer_schedule.empty() && alista.train.layer_schedule.back() != alista.layers)
    throw ValidationError("config key 'alista.layer_schedule' must end at alista.layers");
  if (alista.sweep_first < 1 || alista.sweep_last < alista.sweep_first)
    throw ValidationError("config keys 'alista.sweep_first'/'sweep_last' must form a nonempty range");
  if (eval.detection_threshold < 0.0) throw ValidationError("config key 'eval.detection_threshold' must be >= 0");
  if (eval.bench_repetitions < 3) throw ValidationError("config key 'eval.bench_repetitions' must be >= 3");
}

RunConfig default_config() {
  RunConfig c;
  c.geometry = AcquisitionGeometry::uniform_array(8, 0.1, 0.003125, 400.0, 45.0);
  c.geometry.carrier_frequency_ghz = 5.5;
  c.omp.sparsity = 2;
  c.omp.max_iters = 2;
  c.iht.sparsity = 3;
  c.iht.max_iters = 200;
  c.alista.train.epochs = 300;
  return c;
}

RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  const RunConfig d = default_config();
  json doc = to_json(d, d.geometry.num_channels(), 0.1);
  json user = json::parse(text, nullptr, false, true);
  if (user.is_discarded()) throw ValidationError("config: not valid JSON");
  overlay(doc, user, "");
  for (const auto& o : overrides) apply_override(doc, o);
  return from_json(doc);
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  return parse_config(io::read_text_file(path), overrides);
}

StageSeeds stage_seeds(std::uint64_t root) {
  return {derive_seed(root, "stage:scene"), derive_seed(root, "stage:simulation"),
          derive_seed(root, "stage:training")};
}

}  // namespace tomosar
