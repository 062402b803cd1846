#include "mimic/data.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>


namespace mimic {

namespace fs = std::filesystem;

Image read_png(const std::string& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw IoError("cannot decode PNG " + path + ": " + png.message);
  }
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
  png_color black{0, 0, 0};
  if (!png_image_finish_read(&png, &black, buffer.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw IoError("cannot decode PNG " + path + ": " + msg);
  }
  Image img(static_cast<int>(png.height), static_cast<int>(png.width), channels);
  auto data = img.data();
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(buffer[i]) / 255.0f;
  return img;
}

void write_png(const std::string& path, const Image& img) {
  expects(img.channels() == 1 || img.channels() == 3, "write_png: only 1- and 3-channel images are supported");
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width());
  png.height = static_cast<png_uint_32>(img.height());
  png.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(img.size());
  const auto data = img.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    buffer[i] = static_cast<png_byte>(std::lround(std::clamp(data[i], 0.0f, 1.0f) * 255.0f));
  }
  if (!png_image_write_to_file(&png, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path + ": " + png.message);
  }
}

Image center_crop_resize(const Image& img, int size) {
  expects(size > 0, "center_crop_resize: size must be positive");
  expects(img.height() > 0 && img.width() > 0, "center_crop_resize: empty image");
  if (img.height() == size && img.width() == size) return img;
  const int side = std::min(img.height(), img.width());
  const double top = (img.height() - side) / 2.0;
  const double left = (img.width() - side) / 2.0;
  const double scale = static_cast<double>(side) / size;
  Image out(size, size, img.channels());
  for (int y = 0; y < size; ++y) {
    // Pixel centers map to pixel centers; samples are clamped to the crop.
    const double sy = std::clamp(top + (y + 0.5) * scale - 0.5, top, top + side - 1);
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double fy = sy - y0;
    for (int x = 0; x < size; ++x) {
      const double sx = std::clamp(left + (x + 0.5) * scale - 0.5, left, left + side - 1);
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double fx = sx - x0;
      for (int c = 0; c < img.channels(); ++c) {
        const double v = (1 - fy) * ((1 - fx) * img.at(y0, x0, c) + fx * img.at(y0, x1, c)) +
                         fy * ((1 - fx) * img.at(y1, x0, c) + fx * img.at(y1, x1, c));
        out.at(y, x, c) = static_cast<float>(v);
      }
    }
  }
  return out;
}

Image convert_channels(const Image& img, int channels) {
  expects(channels == 1 || channels == 3, "convert_channels: target must have 1 or 3 channels");
  expects(img.channels() == 1 || img.channels() == 3, "convert_channels: source must have 1 or 3 channels");
  if (img.channels() == channels) return img;
  Image out(img.height(), img.width(), channels);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (channels == 3) {
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, x, 0);
      } else {
        out.at(y, x, 0) = 0.299f * img.at(y, x, 0) + 0.587f * img.at(y, x, 1) + 0.114f * img.at(y, x, 2);
      }
    }
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line, const std::string& where) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        fields.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back();
    } else {
      fields.back() += ch;
    }
  }
  if (quoted) throw IngestError(where + ": unterminated quote");
  return fields;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

DatasetManifest ingest(const std::string& manifest_path) {
  std::ifstream is(manifest_path);
  if (!is) throw IngestError("cannot open manifest " + manifest_path);
  DatasetManifest m;
  const fs::path mpath(manifest_path);
  m.root = mpath.parent_path().string();
  m.split = mpath.stem().string();

  std::string line;
  if (!std::getline(is, line)) throw IngestError(manifest_path + ": empty manifest");
  strip_cr(line);
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const auto header = split_csv_line(line, manifest_path + " header");
  if (header.size() != 2 || header[0] != "path" || header[1] != "label") {
    throw IngestError(manifest_path + ": header must be 'path,label'");
  }

  const fs::path classes_file = mpath.parent_path() / "classes.txt";
  bool have_names = false;
  if (std::ifstream cs(classes_file); cs) {
    std::string name;
    while (std::getline(cs, name)) {
      strip_cr(name);
      if (!name.empty()) m.class_names.push_back(name);
    }
    have_names = true;
  }

  std::size_t row = 0;
  int max_label = -1;
  while (std::getline(is, line)) {
    ++row;
    strip_cr(line);
    if (line.empty()) continue;
    const std::string where = manifest_path + " row " + std::to_string(row);
    const auto fields = split_csv_line(line, where);
    if (fields.size() != 2) throw IngestError(where + ": expected 2 fields, got " + std::to_string(fields.size()));
    ManifestEntry e{.path = fields[0], .label = 0, .row = row};
    if (e.path.empty()) throw IngestError(where + ": empty path");
    std::size_t used = 0;
    try {
      e.label = std::stoi(fields[1], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != fields[1].size()) throw IngestError(where + ": label '" + fields[1] + "' is not an integer");
    if (e.label < 0 || (have_names && e.label >= m.num_classes())) {
      throw IngestError(where + ": label " + std::to_string(e.label) + " out of range [0, " +
                        std::to_string(have_names ? m.num_classes() : 0) + ")");
    }
    if (!fs::is_regular_file(mpath.parent_path() / e.path)) throw IngestError(where + ": missing file " + e.path);
    max_label = std::max(max_label, e.label);
    m.entries.push_back(std::move(e));
  }
  if (!have_names) {
    for (int k = 0; k <= max_label; ++k) m.class_names.push_back(std::to_string(k));
  }
  std::stable_sort(m.entries.begin(), m.entries.end(),
                   [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
  for (std::size_t i = 1; i < m.entries.size(); ++i) {
    if (m.entries[i].path == m.entries[i - 1].path) ++m.duplicate_paths;
  }
  return m;
}

Image load_image(const DatasetManifest& m, std::size_t i, int image_size, int channels) {
  expects(i < m.entries.size(), "load_image: entry index out of range");
  const ManifestEntry& e = m.entries[i];
  try {
    const Image raw = read_png((fs::path(m.root) / e.path).string());
    return center_crop_resize(convert_channels(raw, channels), image_size);
  } catch (const Error& err) {
    throw IngestError(m.split + " manifest row " + std::to_string(e.row) + " (" + e.path + "): " + err.what());
  }
}

Dataset load_dataset(const DatasetManifest& m, int image_size, int channels) {
  Dataset d;
  d.class_names = m.class_names;
  d.samples.reserve(m.entries.size());
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    d.samples.push_back({load_image(m, i, image_size, channels), SoftLabel::one_hot(m.entries[i].label, m.num_classes()),
                         m.entries[i].path});
  }
  return d;
}

int SyntheticSpec::test_count() const {
  if (test_per_class >= 0) return test_per_class;
  return static_cast<int>(std::lround(test_fraction * samples_per_class));
}

void SyntheticSpec::validate() const {
  if (num_classes < 2) throw ConfigError("synthetic: num_classes must be >= 2");
  if (samples_per_class < 2) throw ConfigError("synthetic: samples_per_class must be >= 2");
  if (image_size < 8) throw ConfigError("synthetic: image_size must be >= 8");
  if (channels != 1 && channels != 3) throw ConfigError("synthetic: channels must be 1 or 3");
  if (!(difficulty >= 0.0 && difficulty <= 1.0)) throw ConfigError("synthetic: difficulty must lie in [0, 1]");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("synthetic: test_fraction must lie in [0, 1)");
  const int t = test_count();
  if (t < 0 || t >= samples_per_class) throw ConfigError("synthetic: test count must leave training samples");
}

namespace {

// A pattern is a sum of oriented cosine gratings and signed Gaussian blobs,
// evaluated in continuous coordinates so sub-pixel shifts are exact.
struct Grating {
  double angle, cycles, phase, amplitude;
};
struct Blob {
  double cy, cx, sigma, amplitude;
};
struct Pattern {
  std::vector<Grating> gratings;
  std::vector<Blob> blobs;
  /// Adds the left-right mirror image to the pattern.
  bool symmetric = false;

  double at(double y, double x, double size) const {
    return symmetric ? raw(y, x, size) + raw(y, size - x, size) : raw(y, x, size);
  }

  double raw(double y, double x, double size) const {
    double v = 0.0;
    for (const Grating& g : gratings) {
      const double t = (x * std::cos(g.angle) + y * std::sin(g.angle)) / size;
      v += g.amplitude * std::cos(2.0 * std::numbers::pi * g.cycles * t + g.phase);
    }
    for (const Blob& b : blobs) {
      const double dy = y - b.cy, dx = x - b.cx;
      v += b.amplitude * std::exp(-(dy * dy + dx * dx) / (2.0 * b.sigma * b.sigma));
    }
    return v;
  }
};

// Shared by the labeled task and the pre-training corpus, so both draw from
// one primitive distribution. Cycles are per image width; sigma is a fraction
// of the image size.
constexpr double kCyclesMin = 0.5, kCyclesMax = 1.25;
constexpr double kSigmaMin = 0.2, kSigmaMax = 0.35;
constexpr double kCorpusNoise = 0.005;

Grating random_grating(RandomSource& rng, double amplitude) {
  return {rng.uniform(0.0, std::numbers::pi), rng.uniform(kCyclesMin, kCyclesMax),
          rng.uniform(0.0, 2.0 * std::numbers::pi), amplitude};
}

Blob random_blob(RandomSource& rng, int size, double amplitude) {
  const double margin = size * 0.15;
  return {rng.uniform(margin, size - margin), rng.uniform(margin, size - margin), rng.uniform(kSigmaMin, kSigmaMax) * size,
          rng.bernoulli(0.5) ? amplitude : -amplitude};
}

/// Class k: a grating whose orientation is spread evenly over [0, π/2) plus
/// two blobs at class-specific places, symmetrized left-right so that a
/// horizontal flip keeps the class.
Pattern class_signature(int k, int num_classes, int size, RandomSource& rng) {
  Pattern p;
  p.symmetric = true;
  Grating g = random_grating(rng, 0.5);
  g.angle = 0.5 * std::numbers::pi * (k + 0.5 + rng.uniform(-0.15, 0.15)) / num_classes;
  p.gratings.push_back(g);
  for (int i = 0; i < 2; ++i) p.blobs.push_back(random_blob(rng, size, 0.8));
  return p;
}

Pattern distractor(int size, RandomSource& rng) {
  Pattern p;
  p.gratings.push_back(random_grating(rng, 0.5));
  for (int i = 0; i < 2; ++i) p.blobs.push_back(random_blob(rng, size, 0.8));
  return p;
}

float quantize(double v) { return static_cast<float>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0f; }

Image render(const SyntheticSpec& spec, const Pattern& signature, const std::vector<double>& tint, RandomSource& rng) {
  const int size = spec.image_size;
  const double d = spec.difficulty;
  const double dy = rng.uniform(-1.5, 1.5);
  const double dx = rng.uniform(-1.5, 1.5);
  const double gain = rng.uniform(0.8, 1.2);
  const Pattern noise_pattern = distractor(size, rng);
  const double noise_std = 0.12 * d;
  Image img(size, size, spec.channels);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double s = signature.at(y + 0.5 - dy, x + 0.5 - dx, size);
      const double n = noise_pattern.at(y + 0.5, x + 0.5, size);
      const double base = (1.0 - d) * gain * s + d * n;
      for (int c = 0; c < spec.channels; ++c) {
        img.at(y, x, c) = quantize(0.5 + 0.3 * tint[static_cast<std::size_t>(c)] * base + noise_std * rng.normal());
      }
    }
  }
  return img;
}

}  // namespace

SyntheticSplit synthesize(const SyntheticSpec& spec, RandomSource& rng) {
  spec.validate();
  RandomSource signature_rng(spec.signature_seed);
  std::vector<Pattern> signatures;
  std::vector<std::vector<double>> tints;
  for (int k = 0; k < spec.num_classes; ++k) {
    signatures.push_back(class_signature(k, spec.num_classes, spec.image_size, signature_rng));
    std::vector<double> tint(static_cast<std::size_t>(spec.channels), 1.0);
    if (spec.channels == 3)
      for (double& t : tint) t = signature_rng.uniform(0.6, 1.0);
    tints.push_back(std::move(tint));
  }
  SyntheticSplit out;
  for (int k = 0; k < spec.num_classes; ++k) {
    const std::string name = "class" + std::to_string(k);
    out.train.class_names.push_back(name);
    out.test.class_names.push_back(name);
  }
  const int test = spec.test_count();
  for (int k = 0; k < spec.num_classes; ++k) {
    for (int i = 0; i < spec.samples_per_class; ++i) {
      Dataset& dst = i < spec.samples_per_class - test ? out.train : out.test;
      std::ostringstream id;
      id << "c" << k << "_" << std::setw(5) << std::setfill('0') << i;
      dst.samples.push_back({render(spec, signatures[static_cast<std::size_t>(k)], tints[static_cast<std::size_t>(k)], rng),
                             SoftLabel::one_hot(k, spec.num_classes), id.str()});
    }
  }
  return out;
}

Dataset synthesize_corpus(int count, int image_size, int channels, RandomSource& rng) {
  expects(count >= 1, "synthesize_corpus: count must be >= 1");
  expects(image_size >= 8, "synthesize_corpus: image_size must be >= 8");
  expects(channels == 1 || channels == 3, "synthesize_corpus: channels must be 1 or 3");
  Dataset d;
  d.class_names = {"image"};
  for (int i = 0; i < count; ++i) {
    Pattern p;
    const int gratings = 1 + static_cast<int>(rng.uniform_int(2));
    const int blobs = 1 + static_cast<int>(rng.uniform_int(3));
    for (int g = 0; g < gratings; ++g) {
      p.gratings.push_back(random_grating(rng, rng.uniform(0.3, 0.6)));
    }
    for (int b = 0; b < blobs; ++b) {
      p.blobs.push_back(random_blob(rng, image_size, rng.uniform(0.4, 0.9)));
    }
    std::vector<double> tint(static_cast<std::size_t>(channels), 1.0);
    if (channels == 3)
      for (double& t : tint) t = rng.uniform(0.6, 1.0);
    Image img(image_size, image_size, channels);
    for (int y = 0; y < image_size; ++y)
      for (int x = 0; x < image_size; ++x) {
        const double v = p.at(y + 0.5, x + 0.5, image_size);
        for (int c = 0; c < channels; ++c)
          img.at(y, x, c) = quantize(0.5 + 0.3 * tint[static_cast<std::size_t>(c)] * v + kCorpusNoise * rng.normal());
      }
    std::ostringstream id;
    id << "g" << std::setw(6) << std::setfill('0') << i;
    d.samples.push_back({std::move(img), SoftLabel::one_hot(0, 1), id.str()});
  }
  return d;
}

void write_dataset(const Dataset& data, const std::string& dir, const std::string& split) {
  std::error_code ec;
  fs::create_directories(fs::path(dir) / split, ec);
  if (ec) throw IoError("cannot create directory " + (fs::path(dir) / split).string() + ": " + ec.message());
  {
    std::ofstream cs(fs::path(dir) / "classes.txt", std::ios::trunc);
    if (!cs) throw IoError("cannot write " + (fs::path(dir) / "classes.txt").string());
    for (const std::string& name : data.class_names) cs << name << '\n';
  }
  const fs::path manifest = fs::path(dir) / (split + ".csv");
  std::ofstream os(manifest, std::ios::trunc);
  if (!os) throw IoError("cannot write " + manifest.string());
  os << "path,label\n";
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    std::ostringstream name;
    name << split << "/" << std::setw(5) << std::setfill('0') << i << ".png";
    write_png((fs::path(dir) / name.str()).string(), data.samples[i].image);
    os << csv_quote(name.str()) << ',' << data.samples[i].label.argmax() << '\n';
  }
  if (!os) throw IoError("failed writing " + manifest.string());
}

void generate_synthetic(const SyntheticSpec& spec, const std::string& dir, RandomSource& rng) {
  const SyntheticSplit split = synthesize(spec, rng);
  write_dataset(split.train, dir, "train");
  write_dataset(split.test, dir, "test");
}

void write_embeddings_csv(const std::string& path, const Dataset& data, const Matrix<float>& reps) {
  expects(reps.rows() == static_cast<Index>(data.size()), "write_embeddings_csv: one row per sample required");
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << "source_id,class";
  for (Index j = 0; j < reps.cols(); ++j) os << ",r" << j;
  os << '\n' << std::setprecision(9);
  for (std::size_t i = 0; i < data.size(); ++i) {
    os << csv_quote(data.samples[i].source_id) << ',' << data.samples[i].label.argmax();
    for (Index j = 0; j < reps.cols(); ++j) os << ',' << reps(static_cast<Index>(i), j);
    os << '\n';
  }
  if (!os) throw IoError("failed writing " + path);
}

}  // namespace mimic
