#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coreda/synth.hpp"

namespace coreda {

inline constexpr int kDatasetFormatVersion = 1;

std::uint64_t fnv1a64(const unsigned char* bytes, std::size_t n);

struct ManifestEntry {
  std::string id;
  std::uint64_t offset = 0;  // bytes into the blob
  std::optional<double> label;
  Domain domain = Domain::source;
};

struct DatasetManifest {
  int format_version = kDatasetFormatVersion;
  bool labeled = false;
  std::string blob_file;
  std::string blob_checksum;  // fnv1a64 over the blob bytes, hex
  GenConfig gen;
  DomainConfig dom;
  std::vector<ManifestEntry> entries;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<VideoSample> samples;
};

struct GeneratedDataset {
  Dataset dataset;
  // Ground truth for every sample regardless of `labeled`; callers seal these
  // away for evaluation when the dataset itself is unlabeled.
  std::vector<std::pair<std::string, double>> true_labels;
};

// Skills are drawn uniformly from [6,30]; each sample renders from its own
// substream of `seed` so generation order never shifts results.
GeneratedDataset generate_dataset(int n, bool labeled, Domain domain, const DomainConfig& dom,
                                  const GenConfig& gen, std::uint64_t seed,
                                  bool integer_labels = false);

// Writes <dir>/<stem>.manifest.json and <dir>/<stem>.blob (raw little-endian
// f32, C-order). Returns the manifest path.
std::string save_dataset(const Dataset& ds, const std::string& dir, const std::string& stem);

Dataset load_dataset(const std::string& manifest_path);

std::string write_sealed_labels(const std::vector<std::pair<std::string, double>>& labels,
                                const std::string& dir, const std::string& stem);

std::map<std::string, double> load_sealed_labels(const std::string& path);

}  // namespace coreda
