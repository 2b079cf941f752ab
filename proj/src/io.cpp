#include "tomosar/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace tomosar::io {

static_assert(std::endian::native == std::endian::little, "artifact formats assume a little-endian host");

namespace {

constexpr char kMatrixMagic[8] = {'T', 'S', 'A', 'R', 'M', 'A', 'T', 'X'};
constexpr char kDatasetMagic[8] = {'T', 'S', 'A', 'R', 'D', 'S', 'E', 'T'};
constexpr char kModelMagic[8] = {'T', 'S', 'A', 'R', 'M', 'O', 'D', 'L'};
constexpr char kEstimatesMagic[8] = {'T', 'S', 'A', 'R', 'E', 'S', 'T', 'M'};

class Writer {
 public:
  template <class T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof v);
  }
  void magic(const char (&m)[8]) { buf_.append(m, 8); }
  void str(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void complex(Complex c) {
    put(c.real());
    put(c.imag());
  }
  void sparse(const Profile& p) {
    std::uint32_t nnz = 0;
    for (Eigen::Index l = 0; l < p.size(); ++l) nnz += p[l] != Complex(0.0, 0.0);
    put(nnz);
    for (Eigen::Index l = 0; l < p.size(); ++l) {
      if (p[l] == Complex(0.0, 0.0)) continue;
      put<std::uint32_t>(static_cast<std::uint32_t>(l));
      complex(p[l]);
    }
  }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string data, std::string name) : data_(std::move(data)), name_(std::move(name)) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  void magic(const char (&m)[8], const char* what) {
    need(8);
    if (std::memcmp(data_.data() + pos_, m, 8) != 0)
      throw ValidationError(name_ + ": not a " + what + " file (bad magic)");
    pos_ += 8;
    const auto version = get<std::uint32_t>();
    if (version != kFormatVersion)
      throw ValidationError(name_ + ": unsupported format version " + std::to_string(version));
  }
  std::string str() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  Complex complex() {
    const double re = get<double>();
    const double im = get<double>();
    return {re, im};
  }
  Profile sparse(std::uint32_t length) {
    Profile p = Profile::Zero(length);
    const auto nnz = get<std::uint32_t>();
    if (nnz > length) throw ValidationError(name_ + ": corrupt sparse record");
    for (std::uint32_t i = 0; i < nnz; ++i) {
      const auto idx = get<std::uint32_t>();
      if (idx >= length) throw ValidationError(name_ + ": sparse index out of range");
      p[idx] = complex();
    }
    return p;
  }
  void finish() const {
    if (pos_ != data_.size()) throw ValidationError(name_ + ": trailing bytes after payload");
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw ValidationError(name_ + ": truncated file");
  }
  std::string data_;
  std::string name_;
  std::size_t pos_ = 0;
};

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Reader open_reader(const std::filesystem::path& path) { return Reader(read_all(path), path.string()); }

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  char buf[40];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", v[i]);
    if (i) out += ',';
    out += buf;
  }
  return out;
}

std::vector<double> split_doubles(const std::string& s) {
  std::vector<double> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

}  // namespace

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write failed for '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text_file(const std::filesystem::path& path) { return read_all(path); }

void write_matrix(const std::filesystem::path& path, const MatrixFile& m) {
  Writer w;
  w.magic(kMatrixMagic);
  w.put(kFormatVersion);
  w.put(static_cast<std::uint32_t>(m.kind));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(m.entries.rows()));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(m.entries.cols()));
  w.put(m.steering_hash);
  w.put(m.config_hash);
  w.put(m.objective_value);
  for (Eigen::Index r = 0; r < m.entries.rows(); ++r)
    for (Eigen::Index c = 0; c < m.entries.cols(); ++c) w.complex(m.entries(r, c));
  write_text_file(path, w.bytes());
}

MatrixFile read_matrix(const std::filesystem::path& path) {
  Reader r = open_reader(path);
  r.magic(kMatrixMagic, "matrix");
  MatrixFile m;
  const auto kind = r.get<std::uint32_t>();
  if (kind > 1) throw ValidationError(path.string() + ": unknown matrix kind");
  m.kind = static_cast<MatrixKind>(kind);
  const auto rows = r.get<std::uint64_t>();
  const auto cols = r.get<std::uint64_t>();
  if (rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20))
    throw ValidationError(path.string() + ": implausible matrix dimensions");
  m.steering_hash = r.get<std::uint64_t>();
  m.config_hash = r.get<std::uint64_t>();
  m.objective_value = r.get<double>();
  m.entries.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.entries.rows(); ++i)
    for (Eigen::Index j = 0; j < m.entries.cols(); ++j) m.entries(i, j) = r.complex();
  r.finish();
  return m;
}

void write_dataset(const std::filesystem::path& path, const SampleSet& set, std::uint64_t config_hash) {
  const std::uint32_t n = set.samples.empty() ? 0 : static_cast<std::uint32_t>(set.samples.front().measurement.size());
  const std::uint32_t l = set.samples.empty() ? 0 : static_cast<std::uint32_t>(set.samples.front().label.size());
  Writer w;
  w.magic(kDatasetMagic);
  w.put(kFormatVersion);
  w.put(set.geometry_hash);
  w.put(set.grid_hash);
  w.put(config_hash);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(set.labeling));
  w.put(set.seed);
  w.put(n);
  w.put(l);
  w.put<std::uint64_t>(set.samples.size());
  for (const auto& s : set.samples) {
    if (s.measurement.size() != n || s.label.size() != l || s.truth.size() != l)
      throw ValidationError("write_dataset: samples disagree on dimensions");
    w.put<std::int32_t>(s.coord.azimuth);
    w.put<std::int32_t>(s.coord.range);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(s.split));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(s.provenance));
    w.put(s.snr_db);
    for (Eigen::Index i = 0; i < s.measurement.size(); ++i) w.complex(s.measurement[i]);
    w.sparse(s.label);
    w.sparse(s.truth);
  }
  write_text_file(path, w.bytes());
}

SampleSet read_dataset(const std::filesystem::path& path, std::uint64_t* config_hash) {
  Reader r = open_reader(path);
  r.magic(kDatasetMagic, "dataset");
  SampleSet set;
  set.geometry_hash = r.get<std::uint64_t>();
  set.grid_hash = r.get<std::uint64_t>();
  const auto cfg = r.get<std::uint64_t>();
  if (config_hash) *config_hash = cfg;
  const auto labeling = r.get<std::uint8_t>();
  if (labeling > 1) throw ValidationError(path.string() + ": unknown labeling mode");
  set.labeling = static_cast<Labeling>(labeling);
  set.seed = r.get<std::uint64_t>();
  const auto n = r.get<std::uint32_t>();
  const auto l = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  for (std::uint64_t k = 0; k < count; ++k) {
    PixelSample s;
    s.coord.azimuth = r.get<std::int32_t>();
    s.coord.range = r.get<std::int32_t>();
    const auto split = r.get<std::uint8_t>();
    const auto prov = r.get<std::uint8_t>();
    if (split > 2 || prov > 1) throw ValidationError(path.string() + ": corrupt sample record");
    s.split = static_cast<Split>(split);
    s.provenance = static_cast<Labeling>(prov);
    s.snr_db = r.get<double>();
    s.measurement.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) s.measurement[i] = r.complex();
    s.label = r.sparse(l);
    s.truth = r.sparse(l);
    set.samples.push_back(std::move(s));
  }
  r.finish();
  return set;
}

void write_model(const std::filesystem::path& path, const AlistaModel& model, std::uint64_t config_hash) {
  model.validate();
  const CMatrix& W = model.weights.entries;
  Writer w;
  w.magic(kModelMagic);
  w.put(kFormatVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.layers()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(W.rows()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(W.cols()));
  w.put(model.weights.steering_hash);
  w.put(config_hash);
  for (double t : model.theta) w.put(t);
  for (double e : model.eta) w.put(e);
  for (Eigen::Index i = 0; i < W.rows(); ++i)
    for (Eigen::Index j = 0; j < W.cols(); ++j) w.complex(W(i, j));

  const std::map<std::string, std::string> meta{
      {"constraint", kWeightConstraint},
      {"adjoint", "conjugate_transpose"},
      {"objective_value", join_doubles({model.weights.objective_value})},
      {"loss", to_string(model.loss)},
      {"tied", model.tied ? "true" : "false"},
      {"seed", std::to_string(model.record.seed)},
      {"label_provenance", to_string(model.record.label_provenance)},
      {"best_epoch", std::to_string(model.record.best_epoch)},
      {"train_loss", join_doubles(model.record.train_loss)},
      {"validation_loss", join_doubles(model.record.validation_loss)},
  };
  w.put<std::uint32_t>(static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    w.str(k);
    w.str(v);
  }
  write_text_file(path, w.bytes());
}

namespace {

struct RawModel {
  AlistaModel model;
  std::uint64_t config_hash = 0;
  std::map<std::string, std::string> meta;
};

RawModel parse_model(const std::filesystem::path& path) {
  Reader r = open_reader(path);
  r.magic(kModelMagic, "model");
  RawModel raw;
  const auto K = r.get<std::uint32_t>();
  const auto N = r.get<std::uint32_t>();
  const auto L = r.get<std::uint32_t>();
  if (K == 0 || N == 0 || L == 0) throw ValidationError(path.string() + ": empty model");
  raw.model.weights.steering_hash = r.get<std::uint64_t>();
  raw.config_hash = r.get<std::uint64_t>();
  for (std::uint32_t k = 0; k < K; ++k) raw.model.theta.push_back(r.get<double>());
  for (std::uint32_t k = 0; k < K; ++k) raw.model.eta.push_back(r.get<double>());
  raw.model.weights.entries.resize(N, L);
  for (std::uint32_t i = 0; i < N; ++i)
    for (std::uint32_t j = 0; j < L; ++j) raw.model.weights.entries(i, j) = r.complex();
  const auto n_meta = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    raw.meta[k] = r.str();
  }
  r.finish();

  auto& m = raw.model;
  auto at = [&](const char* key) -> const std::string& {
    auto it = raw.meta.find(key);
    if (it == raw.meta.end()) throw ValidationError(path.string() + ": missing metadata '" + key + "'");
    return it->second;
  };
  m.weights.objective_value = std::stod(at("objective_value"));
  m.loss = loss_kind_from_string(at("loss"));
  m.tied = at("tied") == "true";
  m.record.seed = std::stoull(at("seed"));
  m.record.label_provenance = labeling_from_string(at("label_provenance"));
  m.record.best_epoch = std::stoi(at("best_epoch"));
  m.record.train_loss = split_doubles(at("train_loss"));
  m.record.validation_loss = split_doubles(at("validation_loss"));
  m.validate();
  return raw;
}

}  // namespace

AlistaModel read_model(const std::filesystem::path& path, const SteeringMatrix& R, std::uint64_t* config_hash) {
  RawModel raw = parse_model(path);
  if (raw.model.weights.steering_hash != R.hash())
    throw ValidationError(path.string() + ": model was trained for steering matrix " +
                          hash_hex(raw.model.weights.steering_hash) + " but the configuration yields " +
                          hash_hex(R.hash()));
  if (raw.model.weights.entries.rows() != R.rows() || raw.model.weights.entries.cols() != R.cols())
    throw ValidationError(path.string() + ": model dimensions do not match the steering matrix");
  if (config_hash) *config_hash = raw.config_hash;
  return std::move(raw.model);
}

std::map<std::string, std::string> read_model_metadata(const std::filesystem::path& path) {
  return parse_model(path).meta;
}

void write_estimates(const std::filesystem::path& path, const EstimatesFile& e) {
  const std::uint32_t l = e.estimates.empty() ? 0 : static_cast<std::uint32_t>(e.estimates.front().estimate.size());
  Writer w;
  w.magic(kEstimatesMagic);
  w.put(kFormatVersion);
  w.put(e.config_hash);
  w.put(e.grid_hash);
  w.str(e.solver);
  w.put(l);
  w.put<std::uint64_t>(e.estimates.size());
  for (const auto& p : e.estimates) {
    if (p.estimate.size() != l) throw ValidationError("write_estimates: estimates disagree on length");
    w.put<std::int32_t>(p.coord.azimuth);
    w.put<std::int32_t>(p.coord.range);
    w.sparse(p.estimate);
  }
  write_text_file(path, w.bytes());
}

EstimatesFile read_estimates(const std::filesystem::path& path) {
  Reader r = open_reader(path);
  r.magic(kEstimatesMagic, "estimates");
  EstimatesFile e;
  e.config_hash = r.get<std::uint64_t>();
  e.grid_hash = r.get<std::uint64_t>();
  e.solver = r.str();
  const auto l = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  for (std::uint64_t k = 0; k < count; ++k) {
    PixelEstimate p;
    p.coord.azimuth = r.get<std::int32_t>();
    p.coord.range = r.get<std::int32_t>();
    p.estimate = r.sparse(l);
    e.estimates.push_back(std::move(p));
  }
  r.finish();
  return e;
}

}  // namespace tomosar::io
