#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "scenepool/core.hpp"
#include "scenepool/evaluation.hpp"
#include "scenepool/svm.hpp"
#include "scenepool/vlad.hpp"

namespace scenepool {

// ---------------------------------------------------------------------------
// Feature files
//
//   offset  size  field
//   0       4     magic "SAFV"
//   4       4     version, u32 LE (= 1)
//   8       4     rows, u32 LE
//   12      4     cols, u32 LE
//   16      4     flags, u32 LE (bit 0: post_relu)
//   20      4*r*c payload, IEEE-754 binary32 LE, row-major
// ---------------------------------------------------------------------------

inline constexpr std::size_t kFeatureHeaderBytes = 20;
inline constexpr std::uint32_t kFeatureFormatVersion = 1;

std::vector<std::byte> encode_feature_file(const FeatureMatrix& X);
FeatureMatrix decode_feature_file(std::span<const std::byte> bytes);

FeatureMatrix read_feature_file(const std::filesystem::path& path);
void write_feature_file(const std::filesystem::path& path, const FeatureMatrix& X);

std::vector<std::byte> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes);

// ---------------------------------------------------------------------------
// Manifests (JSON)
// ---------------------------------------------------------------------------

DatasetManifest manifest_from_json(const nlohmann::json& j, std::filesystem::path base_dir = {});
nlohmann::json manifest_to_json(const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);

// ---------------------------------------------------------------------------
// Bundles: named binary64 matrices and text entries in one file.
//
//   magic "SPBN", version u32 LE (= 1), entry count u32 LE, then per entry
//   tag u8 ('M' matrix | 'T' text), name length u16 LE, name bytes, and
//   'M': rows u32, cols u32, rows*cols binary64 LE row-major
//   'T': length u32, bytes
// ---------------------------------------------------------------------------

class Bundle {
 public:
  void put(const std::string& name, Matrix m);
  void put(const std::string& name, std::string text);
  void put_scalar(const std::string& name, double v);

  bool has(const std::string& name) const;
  const Matrix& matrix(const std::string& name) const;
  const std::string& text(const std::string& name) const;
  double scalar(const std::string& name) const;

  std::vector<std::byte> encode() const;
  static Bundle decode(std::span<const std::byte> bytes);

  void save(const std::filesystem::path& path) const;
  static Bundle load(const std::filesystem::path& path);

 private:
  std::map<std::string, Matrix> matrices_;
  std::map<std::string, std::string> texts_;
};

void save_vlad_model(const std::filesystem::path& path, const VladModel& model);
VladModel load_vlad_model(const std::filesystem::path& path);

/// Extra text entries (e.g. the descriptor recipe) are stored alongside.
void save_svm_model(const std::filesystem::path& path, const OvrSvmModel& model,
                    const std::map<std::string, std::string>& metadata = {});
OvrSvmModel load_svm_model(const std::filesystem::path& path,
                           std::map<std::string, std::string>* metadata = nullptr);

void save_descriptor_set(const std::filesystem::path& path, const DescriptorSet& set);
DescriptorSet load_descriptor_set(const std::filesystem::path& path);

}  // namespace scenepool
