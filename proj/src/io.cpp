#include "scenepool/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace scenepool {

namespace {

constexpr std::array<char, 4> kFeatureMagic = {'S', 'A', 'F', 'V'};
constexpr std::array<char, 4> kBundleMagic = {'S', 'P', 'B', 'N'};
constexpr std::uint32_t kBundleVersion = 1;

class ByteWriter {
 public:
  void raw(std::span<const char> chars) {
    for (char c : chars) out_.push_back(static_cast<std::byte>(c));
  }
  void u8(std::uint8_t v) { out_.push_back(static_cast<std::byte>(v)); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v), 4); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  std::vector<std::byte> take() { return std::move(out_); }
  void reserve(std::size_t n) { out_.reserve(n); }

 private:
  void le(std::uint64_t v, int bytes) {
    for (int b = 0; b < bytes; ++b) out_.push_back(static_cast<std::byte>((v >> (8 * b)) & 0xff));
  }
  std::vector<std::byte> out_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::byte> bytes, const char* what) : bytes_(bytes), what_(what) {}

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw FormatError(std::string(what_) + " is truncated: needs " + std::to_string(pos_ + n) +
                        " bytes, has " + std::to_string(bytes_.size()));
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(le(4))); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(n, '\0');
    std::memcpy(s.data(), bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::uint64_t le(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int b = 0; b < bytes; ++b)
      v |= static_cast<std::uint64_t>(std::to_integer<std::uint8_t>(bytes_[pos_ + b])) << (8 * b);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
  const char* what_;
};

std::uint32_t checked_u32(Index v, const char* what) {
  if (v < 0 || static_cast<std::uint64_t>(v) > std::numeric_limits<std::uint32_t>::max())
    throw InvalidArgument(std::string(what) + " does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::vector<std::byte> encode_feature_file(const FeatureMatrix& X) {
  const Matrix& v = X.values();
  ByteWriter w;
  w.reserve(kFeatureHeaderBytes + static_cast<std::size_t>(v.size()) * 4);
  w.raw(kFeatureMagic);
  w.u32(kFeatureFormatVersion);
  w.u32(checked_u32(v.rows(), "row count"));
  w.u32(checked_u32(v.cols(), "column count"));
  w.u32(X.post_relu() ? 1u : 0u);
  for (Index r = 0; r < v.rows(); ++r)
    for (Index c = 0; c < v.cols(); ++c) {
      const auto f = static_cast<float>(v(r, c));
      if (!std::isfinite(f))
        throw InvalidArgument("feature value at (" + std::to_string(r) + ", " + std::to_string(c) +
                              ") is not representable as a finite binary32");
      w.f32(f);
    }
  return w.take();
}

FeatureMatrix decode_feature_file(std::span<const std::byte> bytes) {
  ByteReader r(bytes, "feature file");
  r.need(kFeatureHeaderBytes);
  const std::string magic = r.str(4);
  if (magic != std::string(kFeatureMagic.begin(), kFeatureMagic.end()))
    throw FormatError("feature file has wrong magic (expected SAFV)");
  const std::uint32_t version = r.u32();
  if (version != kFeatureFormatVersion)
    throw FormatError("unsupported feature file version " + std::to_string(version));
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  const std::uint32_t flags = r.u32();
  if (rows == 0 || cols == 0) throw FormatError("feature file declares an empty matrix");
  if ((flags & ~1u) != 0) throw FormatError("feature file has unknown flag bits set");

  const std::uint64_t payload = std::uint64_t{rows} * cols * 4;
  if (r.remaining() < payload)
    throw FormatError("feature file is truncated: payload needs " + std::to_string(payload) +
                      " bytes, has " + std::to_string(r.remaining()));
  if (r.remaining() > payload) throw FormatError("feature file has trailing bytes after payload");

  Matrix values(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < cols; ++j) {
      const float f = r.f32();
      if (!std::isfinite(f))
        throw FormatError("feature file contains a non-finite value at (" + std::to_string(i) +
                          ", " + std::to_string(j) + ")");
      values(i, j) = f;
    }
  try {
    return FeatureMatrix(std::move(values), (flags & 1u) != 0);
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("feature file: ") + e.what());
  }
}

std::vector<std::byte> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::byte> bytes(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size)))
    throw IoError("failed reading '" + path.string() + "'");
  return bytes;
}

void write_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

FeatureMatrix read_feature_file(const std::filesystem::path& path) {
  try {
    return decode_feature_file(read_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_feature_file(const std::filesystem::path& path, const FeatureMatrix& X) {
  write_bytes(path, encode_feature_file(X));
}

// ---------------------------------------------------------------------------

DatasetManifest manifest_from_json(const nlohmann::json& j, std::filesystem::path base_dir) {
  try {
    DatasetManifest m;
    m.name = j.at("name").get<std::string>();
    m.label_space = LabelSpace(j.at("classes").get<std::vector<std::string>>());
    if (j.contains("dim")) m.feature_dim = j.at("dim").get<Index>();
    for (const auto& v : j.at("videos")) {
      VideoRecord rec;
      rec.id = v.at("id").get<std::string>();
      rec.class_name = v.at("class").get<std::string>();
      rec.total_frames = v.at("frames").get<std::int64_t>();
      rec.feature_path = v.at("feature_file").get<std::string>();
      if (v.contains("fps") && !v.at("fps").is_null()) rec.fps = v.at("fps").get<double>();
      m.videos.push_back(std::move(rec));
    }
    m.base_dir = std::move(base_dir);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
}

nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["name"] = m.name;
  j["classes"] = m.label_space.names();
  if (m.feature_dim) j["dim"] = *m.feature_dim;
  nlohmann::json videos = nlohmann::json::array();
  for (const auto& v : m.videos) {
    nlohmann::json rec = {{"id", v.id},
                          {"class", v.class_name},
                          {"frames", v.total_frames},
                          {"feature_file", v.feature_path.generic_string()}};
    if (v.fps) rec["fps"] = *v.fps;
    videos.push_back(std::move(rec));
  }
  j["videos"] = std::move(videos);
  return j;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return manifest_from_json(j, path.parent_path());
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  const std::string text = manifest_to_json(m).dump(2) + "\n";
  write_bytes(path, std::as_bytes(std::span(text.data(), text.size())));
}

// ---------------------------------------------------------------------------

void Bundle::put(const std::string& name, Matrix m) {
  texts_.erase(name);
  matrices_[name] = std::move(m);
}

void Bundle::put(const std::string& name, std::string text) {
  matrices_.erase(name);
  texts_[name] = std::move(text);
}

void Bundle::put_scalar(const std::string& name, double v) { put(name, Matrix::Constant(1, 1, v)); }

bool Bundle::has(const std::string& name) const {
  return matrices_.count(name) > 0 || texts_.count(name) > 0;
}

const Matrix& Bundle::matrix(const std::string& name) const {
  auto it = matrices_.find(name);
  if (it == matrices_.end()) throw FormatError("bundle has no matrix entry '" + name + "'");
  return it->second;
}

const std::string& Bundle::text(const std::string& name) const {
  auto it = texts_.find(name);
  if (it == texts_.end()) throw FormatError("bundle has no text entry '" + name + "'");
  return it->second;
}

double Bundle::scalar(const std::string& name) const {
  const Matrix& m = matrix(name);
  if (m.size() != 1) throw FormatError("bundle entry '" + name + "' is not a scalar");
  return m(0, 0);
}

std::vector<std::byte> Bundle::encode() const {
  ByteWriter w;
  w.raw(kBundleMagic);
  w.u32(kBundleVersion);
  w.u32(static_cast<std::uint32_t>(matrices_.size() + texts_.size()));
  auto name = [&](const std::string& n) {
    if (n.size() > std::numeric_limits<std::uint16_t>::max())
      throw InvalidArgument("bundle entry name too long");
    w.u16(static_cast<std::uint16_t>(n.size()));
    w.raw(n);
  };
  for (const auto& [n, m] : matrices_) {
    w.u8('M');
    name(n);
    w.u32(checked_u32(m.rows(), "row count"));
    w.u32(checked_u32(m.cols(), "column count"));
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) w.f64(m(r, c));
  }
  for (const auto& [n, t] : texts_) {
    w.u8('T');
    name(n);
    w.u32(checked_u32(static_cast<Index>(t.size()), "text length"));
    w.raw(t);
  }
  return w.take();
}

Bundle Bundle::decode(std::span<const std::byte> bytes) {
  ByteReader r(bytes, "bundle");
  if (r.str(4) != std::string(kBundleMagic.begin(), kBundleMagic.end()))
    throw FormatError("bundle has wrong magic (expected SPBN)");
  if (const auto version = r.u32(); version != kBundleVersion)
    throw FormatError("unsupported bundle version " + std::to_string(version));
  const std::uint32_t count = r.u32();
  Bundle b;
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint8_t tag = r.u8();
    const std::string name = r.str(r.u16());
    if (b.has(name)) throw FormatError("bundle entry '" + name + "' appears twice");
    if (tag == 'M') {
      const std::uint32_t rows = r.u32();
      const std::uint32_t cols = r.u32();
      r.need(static_cast<std::size_t>(std::uint64_t{rows} * cols * 8));
      Matrix m(rows, cols);
      for (std::uint32_t i = 0; i < rows; ++i)
        for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = r.f64();
      b.matrices_[name] = std::move(m);
    } else if (tag == 'T') {
      b.texts_[name] = r.str(r.u32());
    } else {
      throw FormatError("bundle entry '" + name + "' has unknown tag");
    }
  }
  if (r.remaining() != 0) throw FormatError("bundle has trailing bytes");
  return b;
}

void Bundle::save(const std::filesystem::path& path) const { write_bytes(path, encode()); }

Bundle Bundle::load(const std::filesystem::path& path) {
  try {
    return decode(read_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

namespace {

void expect_format(const Bundle& b, const std::string& format) {
  if (!b.has("format") || b.text("format") != format)
    throw FormatError("bundle is not a " + format);
}

std::string join_lines(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += '\n';
    out += items[i];
  }
  return out;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  if (text.empty()) return out;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) out.push_back(line);
  return out;
}

Index as_index(double v, const char* what) {
  if (!(v >= 0.0) || v != std::floor(v)) throw FormatError(std::string(what) + " is not a count");
  return static_cast<Index>(v);
}

}  // namespace

void save_vlad_model(const std::filesystem::path& path, const VladModel& model) {
  Bundle b;
  b.put("format", std::string("vlad-model"));
  b.put_scalar("k", static_cast<double>(model.codebook.k()));
  b.put_scalar("d_prime", static_cast<double>(model.pca.d_prime()));
  b.put_scalar("dim", static_cast<double>(model.pca.dim()));
  b.put("normalization",
        std::string(model.normalization == VladNormalization::PowerL2 ? "power-l2" : "raw"));
  b.put("pca.mean", Matrix(model.pca.mean.transpose()));
  b.put("pca.components", model.pca.components);
  b.put("pca.scales", Matrix(model.pca.scales.transpose()));
  b.put("codebook.centers", model.codebook.centers);
  b.put_scalar("codebook.inertia", model.codebook.inertia);
  b.save(path);
}

VladModel load_vlad_model(const std::filesystem::path& path) {
  const Bundle b = Bundle::load(path);
  expect_format(b, "vlad-model");
  VladModel m;
  m.pca.mean = b.matrix("pca.mean").row(0).transpose();
  m.pca.components = b.matrix("pca.components");
  m.pca.scales = b.matrix("pca.scales").row(0).transpose();
  m.codebook.centers = b.matrix("codebook.centers");
  m.codebook.inertia = b.scalar("codebook.inertia");
  const std::string& norm = b.text("normalization");
  if (norm == "power-l2") m.normalization = VladNormalization::PowerL2;
  else if (norm == "raw") m.normalization = VladNormalization::Raw;
  else throw FormatError("unknown VLAD normalization '" + norm + "'");

  const Index k = as_index(b.scalar("k"), "k");
  const Index dp = as_index(b.scalar("d_prime"), "d_prime");
  const Index d = as_index(b.scalar("dim"), "dim");
  if (m.codebook.k() != k || m.codebook.dim() != dp || m.pca.d_prime() != dp ||
      m.pca.dim() != d || m.pca.components.cols() != d || m.pca.scales.size() != dp)
    throw FormatError("VLAD model header disagrees with its matrices");
  return m;
}

void save_svm_model(const std::filesystem::path& path, const OvrSvmModel& model,
                    const std::map<std::string, std::string>& metadata) {
  Bundle b;
  for (const auto& [k, v] : metadata) b.put("meta." + k, v);
  b.put("format", std::string("ovr-svm-model"));
  b.put("classes", join_lines(model.labels().names()));
  b.put_scalar("dim", static_cast<double>(model.dim()));
  const auto& models = model.models();
  if (!models.empty()) {
    b.put("kernel", std::string(kernel_name(models.front().kernel)));
    b.put_scalar("c", models.front().c);
  }
  for (std::size_t i = 0; i < models.size(); ++i) {
    const std::string prefix = "class." + std::to_string(i) + ".";
    b.put(prefix + "sv", models[i].support_vectors);
    b.put(prefix + "coef", Matrix(models[i].coefficients.transpose()));
    b.put_scalar(prefix + "bias", models[i].bias);
    b.put_scalar(prefix + "degenerate", models[i].degenerate ? 1.0 : 0.0);
  }
  b.save(path);
}

OvrSvmModel load_svm_model(const std::filesystem::path& path,
                           std::map<std::string, std::string>* metadata) {
  const Bundle b = Bundle::load(path);
  expect_format(b, "ovr-svm-model");
  LabelSpace labels(split_lines(b.text("classes")));
  const KernelKind kind = parse_kernel(b.text("kernel"));
  const double c = b.scalar("c");
  const Index dim = as_index(b.scalar("dim"), "dim");
  std::vector<BinarySvmModel> models;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::string prefix = "class." + std::to_string(i) + ".";
    BinarySvmModel m;
    m.kernel = kind;
    m.c = c;
    m.support_vectors = b.matrix(prefix + "sv");
    const Matrix& coef = b.matrix(prefix + "coef");
    m.coefficients = coef.size() == 0 ? Vector() : Vector(coef.row(0).transpose());
    m.bias = b.scalar(prefix + "bias");
    m.degenerate = b.scalar(prefix + "degenerate") != 0.0;
    if (m.support_vectors.cols() != dim || m.coefficients.size() != m.support_vectors.rows())
      throw FormatError("SVM model entry " + prefix + " has inconsistent shapes");
    finalize_linear_weights(m);
    models.push_back(std::move(m));
  }
  if (metadata) {
    metadata->clear();
    for (const auto& name : {"measures", "normalization", "vlad_model"})
      if (b.has(std::string("meta.") + name)) (*metadata)[name] = b.text(std::string("meta.") + name);
  }
  return OvrSvmModel(std::move(labels), std::move(models));
}

void save_descriptor_set(const std::filesystem::path& path, const DescriptorSet& set) {
  Bundle b;
  b.put("format", std::string("descriptor-set"));
  b.put("classes", join_lines(set.labels.names()));
  b.put("ids", join_lines(set.ids));
  Matrix labels(static_cast<Index>(set.classes.size()), 1);
  for (std::size_t i = 0; i < set.classes.size(); ++i) labels(static_cast<Index>(i), 0) = set.classes[i];
  b.put("labels", std::move(labels));
  b.put("descriptors", set.descriptors);
  std::string blocks;
  for (const auto& blk : set.blocks) {
    if (!blocks.empty()) blocks += '\n';
    blocks += std::string(measure_name(blk.measure)) + ' ' + std::to_string(blk.offset) + ' ' +
              std::to_string(blk.length);
  }
  b.put("blocks", std::move(blocks));
  b.put("normalization", std::string(normalization_name(set.normalization)));
  b.save(path);
}

DescriptorSet load_descriptor_set(const std::filesystem::path& path) {
  const Bundle b = Bundle::load(path);
  expect_format(b, "descriptor-set");
  DescriptorSet set;
  set.labels = LabelSpace(split_lines(b.text("classes")));
  set.ids = split_lines(b.text("ids"));
  const Matrix& labels = b.matrix("labels");
  for (Index i = 0; i < labels.rows(); ++i) set.classes.push_back(static_cast<int>(labels(i, 0)));
  set.descriptors = b.matrix("descriptors");
  for (const auto& line : split_lines(b.text("blocks"))) {
    std::istringstream is(line);
    std::string name;
    Index offset = 0;
    Index length = 0;
    if (!(is >> name >> offset >> length)) throw FormatError("malformed descriptor block entry");
    set.blocks.push_back({parse_measure(name), offset, length});
  }
  set.normalization = parse_normalization(b.text("normalization"));
  if (set.ids.size() != set.classes.size() ||
      static_cast<Index>(set.classes.size()) != set.descriptors.rows())
    throw FormatError("descriptor set has inconsistent row counts");
  return set;
}

}  // namespace scenepool
