#pragma once

// PNG I/O, CSV manifests, the procedural stand-in dataset, and embedding
// export.

#include "mimic/core.hpp"
#include "mimic/random.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mimic {

/// Manifest row problems: bad CSV, missing file, undecodable image, bad label.
struct IngestError : Error {
  using Error::Error;
};

/// Grayscale and RGB (with or without alpha; alpha is dropped), 8 or 16 bit.
Image read_png(const std::string& path);
/// 1 channel → 8-bit gray, 3 channels → 8-bit RGB. Values are clamped to [0, 1].
void write_png(const std::string& path, const Image& img);

/// Aspect-preserving center crop to a square, then bilinear resize to size×size.
Image center_crop_resize(const Image& img, int size);
/// 1 → 3 replicates the gray plane; 3 → 1 uses Rec. 601 luma.
Image convert_channels(const Image& img, int channels);

struct ManifestEntry {
  std::string path;  // relative to the manifest directory
  int label = 0;
  std::size_t row = 0;  // 1-based data row in the CSV (header excluded)
};

struct DatasetManifest {
  std::string root;
  std::string split;  // manifest file stem, e.g. "train"
  std::vector<ManifestEntry> entries;  // sorted by path
  std::vector<std::string> class_names;
  std::size_t duplicate_paths = 0;

  int num_classes() const { return static_cast<int>(class_names.size()); }
};

/// Reads a `path,label` CSV. Class names come from classes.txt beside the
/// manifest (one per line); without it, K = max label + 1 and names are the
/// indices. Entries are sorted lexicographically by path.
DatasetManifest ingest(const std::string& manifest_path);

/// Decodes entry i, converted to `channels` and resized to `image_size`.
Image load_image(const DatasetManifest& manifest, std::size_t i, int image_size, int channels);
Dataset load_dataset(const DatasetManifest& manifest, int image_size, int channels);

struct SyntheticSpec {
  int num_classes = 7;
  int samples_per_class = 100;
  int image_size = 32;
  int channels = 1;
  std::uint64_t signature_seed = 0;
  /// 0: class signal only; 1: class signal fully replaced by distractors.
  double difficulty = 0.5;
  double test_fraction = 0.2;
  /// When ≥ 0, overrides test_fraction with an exact per-class test count.
  int test_per_class = -1;

  int test_count() const;
  void validate() const;
};

struct SyntheticSplit {
  Dataset train;
  Dataset test;
};

/// Every class contributes exactly samples_per_class images, stratified into
/// train/test. Pixel values are multiples of 1/255, so a PNG round trip is exact.
SyntheticSplit synthesize(const SyntheticSpec& spec, RandomSource& rng);

/// Unlabeled procedural images (gratings and blobs at random placements)
/// for pre-training. Every sample carries the single class "image".
Dataset synthesize_corpus(int count, int image_size, int channels, RandomSource& rng);

/// Writes <dir>/<split>/NNNNN.png, <dir>/<split>.csv, and <dir>/classes.txt.
void write_dataset(const Dataset& data, const std::string& dir, const std::string& split);

/// Writes the train and test splits under `dir`.
void generate_synthetic(const SyntheticSpec& spec, const std::string& dir, RandomSource& rng);

/// CSV: source_id,class,r0..r{d-1}; one row per sample.
void write_embeddings_csv(const std::string& path, const Dataset& data, const Matrix<float>& reps);

}  // namespace mimic
