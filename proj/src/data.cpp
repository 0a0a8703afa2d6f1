#include "pcert/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "pcert/errors.hpp"
#include "pcert/rng.hpp"

namespace pcert {

void LabeledDataset::validate() const {
  if (n < 1) throw ArgumentError("dataset must contain at least one sample");
  if (m < 1 || k < 1) throw ArgumentError("dataset dims must be positive");
  if (features.size() != static_cast<std::size_t>(n) * m ||
      labels.size() != static_cast<std::size_t>(n)) {
    throw ShapeError("dataset storage does not match n x m");
  }
  for (double x : features) {
    if (!std::isfinite(x)) throw DataError("dataset contains non-finite feature");
  }
  for (int y : labels) {
    if (y < 0 || y >= k) throw DataError("label out of range");
  }
}

LabeledDataset make_blobs(std::uint64_t seed, int n, int m, int k,
                          double separation) {
  if (n < k) throw ArgumentError("make_blobs: need n >= k");
  if (m < 1) throw ArgumentError("make_blobs: need m >= 1");
  if (separation <= 0.0) throw ArgumentError("make_blobs: separation must be > 0");
  Rng rng(seed);

  // Rejection-sample centers in an origin-centered box wide enough for k
  // points at the requested spacing; centered inputs keep downstream ReLU
  // training well-conditioned.
  const double half = separation * std::max(1.0, 0.75 * k);
  std::vector<double> centers;
  constexpr int kMaxTries = 1000;
  int tries = 0;
  for (; tries < kMaxTries; ++tries) {
    centers.assign(static_cast<std::size_t>(k) * m, 0.0);
    for (double& c : centers) c = rng.uniform(-half, half);
    bool ok = true;
    for (int a = 0; a < k && ok; ++a) {
      for (int b = a + 1; b < k && ok; ++b) {
        double d2 = 0.0;
        for (int j = 0; j < m; ++j) {
          const double diff = centers[a * m + j] - centers[b * m + j];
          d2 += diff * diff;
        }
        if (d2 < separation * separation) ok = false;
      }
    }
    if (ok) break;
  }
  if (tries == kMaxTries) {
    throw GenerationError("make_blobs: could not place centers at requested separation");
  }

  LabeledDataset out;
  out.n = n;
  out.m = m;
  out.k = k;
  out.features.resize(static_cast<std::size_t>(n) * m);
  out.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const int c = std::min(k - 1, i * k / n);
    out.labels[i] = c;
    for (int j = 0; j < m; ++j) {
      out.features[static_cast<std::size_t>(i) * m + j] =
          centers[c * m + j] + rng.normal();
    }
  }
  return out;
}

LabeledDataset make_moons(std::uint64_t seed, int n, double noise) {
  if (n < 2 || n % 2 != 0) throw ArgumentError("make_moons: n must be even and >= 2");
  if (noise < 0.0) throw ArgumentError("make_moons: noise must be >= 0");
  Rng rng(seed);
  const int half = n / 2;
  LabeledDataset out;
  out.n = n;
  out.m = 2;
  out.k = 2;
  out.features.resize(static_cast<std::size_t>(n) * 2);
  out.labels.resize(n);
  const double pi = 3.14159265358979323846;
  for (int i = 0; i < half; ++i) {
    const double t = (half == 1) ? 0.0 : pi * i / (half - 1);
    out.features[2 * i] = std::cos(t);
    out.features[2 * i + 1] = std::sin(t);
    out.labels[i] = 0;
  }
  for (int i = 0; i < half; ++i) {
    const double t = (half == 1) ? 0.0 : pi * i / (half - 1);
    const int r = half + i;
    out.features[2 * r] = 1.0 - std::cos(t);
    out.features[2 * r + 1] = 0.5 - std::sin(t);
    out.labels[r] = 1;
  }
  if (noise > 0.0) {
    for (double& x : out.features) x += noise * rng.normal();
  }
  return out;
}

namespace {

std::uint32_t read_u32_be(std::ifstream& f, const std::string& path) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  if (!f) throw IoError("truncated IDX file: " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

LabeledDataset load_idx(const std::string& images_path,
                        const std::string& labels_path) {
  std::ifstream fi(images_path, std::ios::binary);
  if (!fi) throw IoError("cannot open " + images_path);
  std::ifstream fl(labels_path, std::ios::binary);
  if (!fl) throw IoError("cannot open " + labels_path);

  const std::uint32_t magic_i = read_u32_be(fi, images_path);
  if (magic_i != 0x00000803u) {
    throw FormatError("bad image magic in " + images_path);
  }
  const std::uint32_t count_i = read_u32_be(fi, images_path);
  const std::uint32_t rows = read_u32_be(fi, images_path);
  const std::uint32_t cols = read_u32_be(fi, images_path);

  const std::uint32_t magic_l = read_u32_be(fl, labels_path);
  if (magic_l != 0x00000801u) {
    throw FormatError("bad label magic in " + labels_path);
  }
  const std::uint32_t count_l = read_u32_be(fl, labels_path);
  if (count_i != count_l) {
    throw DataError("image/label count mismatch between " + images_path +
                    " and " + labels_path);
  }

  LabeledDataset out;
  out.n = static_cast<int>(count_i);
  out.m = static_cast<int>(rows * cols);
  out.features.resize(static_cast<std::size_t>(out.n) * out.m);
  out.labels.resize(out.n);

  std::vector<unsigned char> buf(static_cast<std::size_t>(out.m));
  for (int i = 0; i < out.n; ++i) {
    fi.read(reinterpret_cast<char*>(buf.data()), buf.size());
    if (!fi) throw IoError("truncated IDX file: " + images_path);
    for (int j = 0; j < out.m; ++j) {
      out.features[static_cast<std::size_t>(i) * out.m + j] = buf[j] / 255.0;
    }
  }
  std::vector<unsigned char> lab(static_cast<std::size_t>(out.n));
  fl.read(reinterpret_cast<char*>(lab.data()), lab.size());
  if (!fl) throw IoError("truncated IDX file: " + labels_path);
  int max_label = 0;
  for (int i = 0; i < out.n; ++i) {
    out.labels[i] = lab[i];
    max_label = std::max(max_label, out.labels[i]);
  }
  out.k = max_label + 1;
  return out;
}

namespace {

std::vector<int> choose_sorted(int n, int n_keep, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates, then restore original ordering of the kept rows.
  for (int i = 0; i < n_keep; ++i) {
    const int j = i + static_cast<int>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n_keep);
  std::sort(idx.begin(), idx.end());
  return idx;
}

LabeledDataset take_rows(const LabeledDataset& data,
                         const std::vector<int>& idx) {
  LabeledDataset out;
  out.n = static_cast<int>(idx.size());
  out.m = data.m;
  out.k = data.k;
  out.features.resize(static_cast<std::size_t>(out.n) * data.m);
  out.labels.resize(out.n);
  for (int i = 0; i < out.n; ++i) {
    const auto src = data.row(idx[i]);
    std::copy(src.begin(), src.end(),
              out.features.begin() + static_cast<std::size_t>(i) * data.m);
    out.labels[i] = data.labels[idx[i]];
  }
  return out;
}

}  // namespace

LabeledDataset subsample(const LabeledDataset& data, std::uint64_t seed,
                         int n_keep) {
  if (n_keep < 1 || n_keep > data.n) {
    throw ArgumentError("subsample: n_keep out of range");
  }
  return take_rows(data, choose_sorted(data.n, n_keep, seed));
}

std::pair<LabeledDataset, LabeledDataset> split_dataset(
    const LabeledDataset& data, std::uint64_t seed, int n_first) {
  if (n_first < 1 || n_first >= data.n) {
    throw ArgumentError("split_dataset: n_first out of range");
  }
  const std::vector<int> first = choose_sorted(data.n, n_first, seed);
  std::vector<int> rest;
  rest.reserve(data.n - n_first);
  std::size_t cursor = 0;
  for (int i = 0; i < data.n; ++i) {
    if (cursor < first.size() && first[cursor] == i) {
      ++cursor;
    } else {
      rest.push_back(i);
    }
  }
  return {take_rows(data, first), take_rows(data, rest)};
}

}  // namespace pcert
