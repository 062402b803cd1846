#pragma once

// Named-tensor checkpoint container. Layout is documented in
// docs/checkpoint_format.md.

#include "mimic/core.hpp"
#include "mimic/nn.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mimic {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct TensorRecord {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  bool droppable = false;
  std::vector<float> values;  // row-major
};

struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<TensorRecord> tensors;

  const TensorRecord* find(std::string_view name) const;

  void write(std::ostream& os) const;
  static Checkpoint read(std::istream& is);
  void save(const std::string& path) const;
  /// Throws LoadError if the file is missing, truncated, or of another format.
  static Checkpoint load(const std::string& path);
};

template <typename Module>
std::vector<TensorRecord> capture_tensors(const Module& module, bool include_droppable = true) {
  std::vector<TensorRecord> out;
  module.visit([&](const Parameter<float>& p) {
    if (p.droppable && !include_droppable) return;
    TensorRecord t{.name = p.name, .rows = p.value.rows(), .cols = p.value.cols(), .droppable = p.droppable, .values = {}};
    t.values.resize(static_cast<std::size_t>(p.value.size()));
    Eigen::Map<Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(t.values.data(), t.rows, t.cols) =
        p.value;
    out.push_back(std::move(t));
  });
  return out;
}

/// Copies every selected parameter from `ckpt`. Missing tensors and shape
/// mismatches are collected and reported together in one LoadError.
template <typename Module>
void restore_tensors(Module& module, const Checkpoint& ckpt,
                     const std::function<bool(const Parameter<float>&)>& select) {
  std::vector<std::string> problems;
  module.visit([&](Parameter<float>& p) {
    if (!select(p)) return;
    const TensorRecord* t = ckpt.find(p.name);
    if (t == nullptr) {
      problems.push_back(p.name + " (missing)");
    } else if (t->rows != p.value.rows() || t->cols != p.value.cols()) {
      problems.push_back(p.name + " (checkpoint " + std::to_string(t->rows) + "x" + std::to_string(t->cols) +
                         ", model " + std::to_string(p.value.rows()) + "x" + std::to_string(p.value.cols()) + ")");
    } else {
      p.value = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          t->values.data(), t->rows, t->cols);
    }
  });
  if (!problems.empty()) {
    std::string msg = "checkpoint is incompatible with the model; mismatched tensors:";
    for (const std::string& name : problems) msg += "\n  " + name;
    throw LoadError(msg);
  }
}

}  // namespace mimic
