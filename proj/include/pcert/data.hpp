#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pcert {

/// Dense labeled dataset, features row-major (n x m), labels zero-based.
struct LabeledDataset {
  int n = 0;
  int m = 0;
  int k = 0;
  std::vector<double> features;
  std::vector<int> labels;

  std::span<const double> row(int i) const {
    return {features.data() + static_cast<std::size_t>(i) * m,
            static_cast<std::size_t>(m)};
  }
  std::span<double> row(int i) {
    return {features.data() + static_cast<std::size_t>(i) * m,
            static_cast<std::size_t>(m)};
  }

  void validate() const;
};

// k isotropic unit-variance Gaussian clusters whose centers are pairwise at
// least `separation` apart. Samples are assigned to classes in contiguous
// blocks, as evenly as possible.
LabeledDataset make_blobs(std::uint64_t seed, int n, int m, int k,
                          double separation);

// Two interleaving unit half-circles with additive Gaussian noise; k = 2,
// n must be even.
LabeledDataset make_moons(std::uint64_t seed, int n, double noise);

// IDX image/label pair (big-endian header, raw bytes). Features are bytes
// divided by 255, images flattened row-major.
LabeledDataset load_idx(const std::string& images_path,
                        const std::string& labels_path);

// Uniform without-replacement subset; kept rows stay in their original order.
LabeledDataset subsample(const LabeledDataset& data, std::uint64_t seed,
                         int n_keep);

// Disjoint random split into (n_first, n - n_first) rows, both sides in
// their original order.
std::pair<LabeledDataset, LabeledDataset> split_dataset(
    const LabeledDataset& data, std::uint64_t seed, int n_first);

}  // namespace pcert
