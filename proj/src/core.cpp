#include "scenepool/core.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <sstream>

namespace scenepool {

FeatureMatrix::FeatureMatrix(Matrix values, bool post_relu)
    : values_(std::move(values)), post_relu_(post_relu) {
  if (values_.rows() < 1 || values_.cols() < 1)
    throw InvalidArgument("feature matrix must have at least one row and one column");
  if (!values_.allFinite()) throw InvalidArgument("feature matrix contains non-finite values");
  if (post_relu_ && values_.minCoeff() < 0.0)
    throw InvalidArgument("feature matrix tagged post_relu contains negative values");
}

FeatureMatrix FeatureMatrix::select_frames(std::span<const std::size_t> one_based) const {
  if (one_based.empty()) throw InvalidArgument("frame selection is empty");
  Matrix out(static_cast<Index>(one_based.size()), dim());
  for (std::size_t r = 0; r < one_based.size(); ++r) {
    const std::size_t idx = one_based[r];
    if (idx < 1 || idx > static_cast<std::size_t>(frames()))
      throw InvalidArgument("frame index " + std::to_string(idx) + " outside [1, " +
                            std::to_string(frames()) + "]");
    out.row(static_cast<Index>(r)) = values_.row(static_cast<Index>(idx - 1));
  }
  return FeatureMatrix(std::move(out), post_relu_);
}

namespace {

constexpr std::array<std::string_view, 6> kMeasureNames = {"mean", "sd",  "skew",
                                                           "kurt", "max", "vlad"};

}  // namespace

std::string_view measure_name(Measure m) { return kMeasureNames[static_cast<std::size_t>(m)]; }

Measure parse_measure(std::string_view name) {
  for (std::size_t i = 0; i < kMeasureNames.size(); ++i)
    if (kMeasureNames[i] == name) return static_cast<Measure>(i);
  throw InvalidArgument("unknown measure '" + std::string(name) +
                        "' (expected mean, sd, skew, kurt, max or vlad)");
}

std::vector<Measure> parse_measures(std::string_view csv) {
  std::vector<Measure> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    const std::size_t end = comma == std::string_view::npos ? csv.size() : comma;
    std::string_view item = csv.substr(start, end - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (item.empty()) throw InvalidArgument("empty measure in list '" + std::string(csv) + "'");
    const Measure m = parse_measure(item);
    if (std::find(out.begin(), out.end(), m) != out.end())
      throw InvalidArgument("measure '" + std::string(item) + "' listed twice");
    out.push_back(m);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string format_measures(std::span<const Measure> measures) {
  std::string out;
  for (Measure m : measures) {
    if (!out.empty()) out += ',';
    out += measure_name(m);
  }
  return out;
}

std::string_view normalization_name(Normalization n) {
  switch (n) {
    case Normalization::None: return "none";
    case Normalization::PerBlock: return "block";
    case Normalization::Global: return "global";
  }
  return "none";
}

Normalization parse_normalization(std::string_view name) {
  if (name == "none") return Normalization::None;
  if (name == "block") return Normalization::PerBlock;
  if (name == "global") return Normalization::Global;
  throw InvalidArgument("unknown normalization '" + std::string(name) +
                        "' (expected block, global or none)");
}

VideoDescriptor::VideoDescriptor(Vector values, std::vector<DescriptorBlock> blocks,
                                 Normalization normalization)
    : values_(std::move(values)), blocks_(std::move(blocks)), normalization_(normalization) {
  Index expected = 0;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].offset != expected)
      throw InvalidArgument("descriptor blocks are not contiguous");
    if (i > 0 && blocks_[i - 1].measure >= blocks_[i].measure)
      throw InvalidArgument("descriptor blocks are not in canonical order");
    expected += blocks_[i].length;
  }
  if (expected != values_.size())
    throw InvalidArgument("descriptor length does not equal the sum of block lengths");
}

VideoDescriptor descriptor_concat(std::vector<std::pair<Measure, Vector>> blocks,
                                  Normalization normalization) {
  if (blocks.empty()) throw InvalidArgument("cannot concatenate an empty block list");
  std::stable_sort(blocks.begin(), blocks.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < blocks.size(); ++i)
    if (blocks[i].first == blocks[i - 1].first)
      throw InvalidArgument("measure '" + std::string(measure_name(blocks[i].first)) +
                            "' appears twice in descriptor");

  Index total = 0;
  for (const auto& [m, v] : blocks) total += v.size();

  Vector values(total);
  std::vector<DescriptorBlock> layout;
  layout.reserve(blocks.size());
  Index offset = 0;
  for (const auto& [m, v] : blocks) {
    values.segment(offset, v.size()) = v;
    layout.push_back({m, offset, v.size()});
    offset += v.size();
  }
  return VideoDescriptor(std::move(values), std::move(layout), normalization);
}

VideoDescriptor descriptor_concat(const VideoDescriptor& a, const VideoDescriptor& b) {
  std::vector<std::pair<Measure, Vector>> parts;
  for (const auto* d : {&a, &b})
    for (const auto& blk : d->blocks()) parts.emplace_back(blk.measure, d->block(blk));
  const Normalization n =
      a.normalization() == b.normalization() && a.normalization() == Normalization::PerBlock
          ? Normalization::PerBlock
          : Normalization::None;
  return descriptor_concat(std::move(parts), n);
}

Matrix stack_descriptors(std::span<const VideoDescriptor> descriptors) {
  if (descriptors.empty()) return Matrix(0, 0);
  const Index len = descriptors.front().size();
  Matrix out(static_cast<Index>(descriptors.size()), len);
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    if (descriptors[i].size() != len)
      throw DimensionMismatch("descriptors have differing lengths");
    out.row(static_cast<Index>(i)) = descriptors[i].values().transpose();
  }
  return out;
}

LabelSpace::LabelSpace(std::vector<std::string> names) : names_(std::move(names)) {
  std::sort(names_.begin(), names_.end());
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw InvalidArgument("class name must not be empty");
    if (i > 0 && names_[i] == names_[i - 1])
      throw InvalidArgument("class '" + names_[i] + "' listed twice");
  }
}

const std::string& LabelSpace::name(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= names_.size())
    throw InvalidArgument("class id " + std::to_string(id) + " out of range");
  return names_[static_cast<std::size_t>(id)];
}

std::optional<int> LabelSpace::find(std::string_view name) const {
  auto it = std::lower_bound(names_.begin(), names_.end(), name);
  if (it == names_.end() || *it != name) return std::nullopt;
  return static_cast<int>(it - names_.begin());
}

int LabelSpace::id(std::string_view name) const {
  if (auto found = find(name)) return *found;
  throw InvalidArgument("unknown class '" + std::string(name) + "'");
}

std::filesystem::path DatasetManifest::resolve(const VideoRecord& v) const {
  if (v.feature_path.is_absolute() || base_dir.empty()) return v.feature_path;
  return base_dir / v.feature_path;
}

std::string ManifestReport::summary() const {
  std::ostringstream os;
  os << issues.size() << " manifest problem" << (issues.size() == 1 ? "" : "s");
  for (const auto& issue : issues) os << "\n  " << issue.subject << ": " << issue.message;
  return os.str();
}

ManifestReport validate_manifest(const DatasetManifest& m, ValidationOptions opts) {
  ManifestReport report;
  auto add = [&](ManifestIssue::Kind kind, const std::string& subject, std::string msg) {
    report.issues.push_back({kind, subject, std::move(msg)});
  };

  std::set<std::string> seen;
  std::map<std::string, int> per_class;
  for (const auto& v : m.videos) {
    if (!seen.insert(v.id).second)
      add(ManifestIssue::Kind::DuplicateId, v.id, "duplicate video id '" + v.id + "'");
    if (!m.label_space.find(v.class_name))
      add(ManifestIssue::Kind::UnknownClass, v.id, "unknown class '" + v.class_name + "'");
    else
      ++per_class[v.class_name];
    if (v.total_frames < 1)
      add(ManifestIssue::Kind::ZeroFrames, v.id, "video has no frames");
    if (opts.check_files) {
      const auto path = m.resolve(v);
      std::error_code ec;
      if (!std::filesystem::is_regular_file(path, ec))
        add(ManifestIssue::Kind::MissingFeatureFile, v.id,
            "missing feature file '" + path.string() + "'");
    }
  }
  for (const auto& name : m.label_space.names())
    if (per_class[name] == 0)
      add(ManifestIssue::Kind::EmptyClass, name, "empty class '" + name + "'");
  return report;
}

const DatasetManifest& require_valid(const DatasetManifest& m, ValidationOptions opts) {
  const auto report = validate_manifest(m, opts);
  if (!report.ok()) throw InvalidArgument(report.summary());
  return m;
}

}  // namespace scenepool
