#pragma once
// The portable on-disk dataset container and its in-memory form. A dataset
// directory holds manifest.json (split/shape/count metadata, labels and
// regression targets) plus samples.f32, the raw little-endian float32
// sample block in storage order (h-major, then w, then channel; one sample
// after another).

#include <string>
#include <vector>

#include "saeda/tensor.hpp"

namespace saeda {

enum class SplitTag { source, target_labeled, target_unlabeled };

const char* split_name(SplitTag tag);
SplitTag split_from_name(const std::string& name);

struct Dataset {
  Shape3 shape;
  int n = 0;
  std::vector<float> samples; // n * shape.numel(), values in [0,1]
  std::vector<int> labels;    // empty = unlabeled
  std::vector<float> targets; // empty = no regression targets (micrometers)
  SplitTag split = SplitTag::source;
  std::vector<std::string> class_names;

  bool has_labels() const { return !labels.empty(); }
  bool has_targets() const { return !targets.empty(); }
  int dim() const { return shape.numel(); }
  const float* sample(int i) const { return samples.data() + (size_t)i * dim(); }
  float* sample(int i) { return samples.data() + (size_t)i * dim(); }

  bool operator==(const Dataset&) const = default;

  // length agreement and the [0,1] value contract.
  void check() const;
};

void save_dataset(const Dataset& dataset, const std::string& dir);
Dataset load_dataset(const std::string& dir);

} // namespace saeda
