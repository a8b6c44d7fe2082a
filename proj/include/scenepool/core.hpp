#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scenepool/error.hpp"

namespace scenepool {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// ---------------------------------------------------------------------------
// Per-frame features
// ---------------------------------------------------------------------------

/// Per-frame activations of one video: row i is the feature vector of the
/// i-th selected frame. Always at least 1x1 with finite entries; when tagged
/// post_relu every entry is non-negative.
class FeatureMatrix {
 public:
  explicit FeatureMatrix(Matrix values, bool post_relu = false);

  Index frames() const { return values_.rows(); }
  Index dim() const { return values_.cols(); }
  bool post_relu() const { return post_relu_; }
  const Matrix& values() const { return values_; }

  /// Rows picked by 1-based frame indices, in the given order.
  FeatureMatrix select_frames(std::span<const std::size_t> one_based) const;

 private:
  Matrix values_;
  bool post_relu_ = false;
};

// ---------------------------------------------------------------------------
// Descriptors
// ---------------------------------------------------------------------------

/// Temporal pooling measures. The enumerator order is the canonical block
/// order of concatenated descriptors.
enum class Measure : std::uint8_t { Mean = 0, Sd, Skew, Kurt, Max, Vlad };

std::string_view measure_name(Measure m);
Measure parse_measure(std::string_view name);
/// Comma separated list such as "mean,sd". Rejects duplicates and empty items.
std::vector<Measure> parse_measures(std::string_view csv);
std::string format_measures(std::span<const Measure> measures);

enum class Normalization : std::uint8_t {
  None,
  PerBlock,  ///< each block scaled to unit L2 norm independently
  Global,    ///< the whole concatenated vector scaled to unit L2 norm
};

std::string_view normalization_name(Normalization n);
Normalization parse_normalization(std::string_view name);

struct DescriptorBlock {
  Measure measure;
  Index offset;
  Index length;

  bool operator==(const DescriptorBlock&) const = default;
};

/// Aggregated vector for one video together with the layout of its blocks.
class VideoDescriptor {
 public:
  VideoDescriptor(Vector values, std::vector<DescriptorBlock> blocks,
                  Normalization normalization = Normalization::None);

  const Vector& values() const { return values_; }
  const std::vector<DescriptorBlock>& blocks() const { return blocks_; }
  Normalization normalization() const { return normalization_; }
  Index size() const { return values_.size(); }

  Eigen::VectorBlock<const Vector> block(const DescriptorBlock& b) const {
    return values_.segment(b.offset, b.length);
  }

 private:
  Vector values_;
  std::vector<DescriptorBlock> blocks_;
  Normalization normalization_ = Normalization::None;
};

/// Concatenates measure blocks in canonical order. Throws on an empty list
/// or a repeated measure.
VideoDescriptor descriptor_concat(std::vector<std::pair<Measure, Vector>> blocks,
                                  Normalization normalization = Normalization::None);

/// Concatenation of two existing descriptors; the result is re-laid out in
/// canonical block order.
VideoDescriptor descriptor_concat(const VideoDescriptor& a, const VideoDescriptor& b);

/// Stacks descriptors as rows of a matrix. All must have equal length.
Matrix stack_descriptors(std::span<const VideoDescriptor> descriptors);

// ---------------------------------------------------------------------------
// Labels and datasets
// ---------------------------------------------------------------------------

/// Class names with contiguous ids assigned in sorted name order.
class LabelSpace {
 public:
  LabelSpace() = default;
  explicit LabelSpace(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  const std::string& name(int id) const;
  std::optional<int> find(std::string_view name) const;
  int id(std::string_view name) const;
  const std::vector<std::string>& names() const { return names_; }

  bool operator==(const LabelSpace&) const = default;

 private:
  std::vector<std::string> names_;
};

struct VideoRecord {
  std::string id;
  std::string class_name;
  std::int64_t total_frames = 0;
  std::filesystem::path feature_path;
  std::optional<double> fps;
};

struct DatasetManifest {
  std::string name;
  LabelSpace label_space;
  std::vector<VideoRecord> videos;
  std::optional<Index> feature_dim;
  /// Directory that relative feature paths are resolved against.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const VideoRecord& v) const;
  int class_id(const VideoRecord& v) const { return label_space.id(v.class_name); }
};

struct ManifestIssue {
  enum class Kind { DuplicateId, UnknownClass, MissingFeatureFile, ZeroFrames, EmptyClass };
  Kind kind;
  std::string subject;  ///< video id, or class name for EmptyClass
  std::string message;
};

struct ManifestReport {
  std::vector<ManifestIssue> issues;
  bool ok() const { return issues.empty(); }
  std::string summary() const;
};

struct ValidationOptions {
  bool check_files = true;
};

ManifestReport validate_manifest(const DatasetManifest& m, ValidationOptions opts = {});

/// Throws InvalidArgument carrying the report summary when validation fails.
const DatasetManifest& require_valid(const DatasetManifest& m, ValidationOptions opts = {});

}  // namespace scenepool
