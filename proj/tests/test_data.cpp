#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "idx_writer.hpp"
#include "pcert/data.hpp"
#include "pcert/errors.hpp"
#include "pcert/nn.hpp"

using namespace pcert;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("make_blobs: deterministic, labeled, well separated") {
  const auto a = make_blobs(5, 400, 2, 2, 10.0);
  const auto b = make_blobs(5, 400, 2, 2, 10.0);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  a.validate();

  // Cluster means must respect the separation up to sampling noise.
  double mean0[2] = {0, 0}, mean1[2] = {0, 0};
  int n0 = 0, n1 = 0;
  for (int i = 0; i < a.n; ++i) {
    if (a.labels[i] == 0) {
      mean0[0] += a.row(i)[0];
      mean0[1] += a.row(i)[1];
      ++n0;
    } else {
      mean1[0] += a.row(i)[0];
      mean1[1] += a.row(i)[1];
      ++n1;
    }
  }
  const double dx = mean0[0] / n0 - mean1[0] / n1;
  const double dy = mean0[1] / n0 - mean1[1] / n1;
  CHECK(std::sqrt(dx * dx + dy * dy) > 8.0);
}

TEST_CASE("make_blobs: k = 1 gives a single label") {
  const auto d = make_blobs(9, 50, 3, 1, 4.0);
  for (int y : d.labels) CHECK(y == 0);
}

TEST_CASE("make_blobs: separable instance trains to high accuracy") {
  const auto train_set = make_blobs(101, 400, 2, 2, 10.0);
  OptimizerConfig cfg;
  cfg.kind = OptKind::GD;
  cfg.learning_rate = 0.1;
  Mlp net = init_mlp(MlpSpec{{2, 8, 2}}, 7);
  const TrainRecord rec = train(net, train_set, cfg, 200);
  CHECK(accuracy(Mlp{net.spec, rec.theta_final}, train_set) >= 0.99);
}

TEST_CASE("make_moons: zero noise lies exactly on the two arcs") {
  const auto d = make_moons(3, 50, 0.0);
  for (int i = 0; i < d.n; ++i) {
    const auto r = d.row(i);
    double radius;
    if (d.labels[i] == 0) {
      radius = std::sqrt(r[0] * r[0] + r[1] * r[1]);
    } else {
      const double x = r[0] - 1.0;
      const double y = r[1] - 0.5;
      radius = std::sqrt(x * x + y * y);
    }
    CHECK(std::fabs(radius - 1.0) < 1e-12);
  }
}

TEST_CASE("make_moons: n = 2 gives one point per class") {
  const auto d = make_moons(1, 2, 0.0);
  CHECK(d.n == 2);
  CHECK(d.labels[0] == 0);
  CHECK(d.labels[1] == 1);
}

TEST_CASE("make_moons: odd n rejected") {
  CHECK_THROWS_AS(make_moons(1, 3, 0.0), ArgumentError);
}

TEST_CASE("make_moons: an MLP beats a linear model on the noisy instance") {
  const auto train_set = make_moons(11, 400, 0.1);
  const auto test_set = make_moons(12, 400, 0.1);
  OptimizerConfig cfg;
  cfg.kind = OptKind::GD;
  cfg.learning_rate = 0.3;

  Mlp linear = init_mlp(MlpSpec{{2, 2}}, 5);
  const TrainRecord lin = train(linear, train_set, cfg, 400);
  const double lin_acc = accuracy(Mlp{linear.spec, lin.theta_final}, test_set);

  Mlp mlp = init_mlp(MlpSpec{{2, 16, 16, 2}}, 5);
  const TrainRecord deep = train(mlp, train_set, cfg, 400);
  const double mlp_acc = accuracy(Mlp{mlp.spec, deep.theta_final}, test_set);

  CHECK(lin_acc < mlp_acc);
}

TEST_CASE("load_idx: round-trips the test writer's output") {
  const std::string img = temp_path("pcert_idx_img.bin");
  const std::string lab = temp_path("pcert_idx_lab.bin");
  testfix::write_idx_images(img, 2, 2, 2, {0, 255, 255, 0, 255, 255, 0, 0});
  testfix::write_idx_labels(lab, {1, 0});
  const auto d = load_idx(img, lab);
  CHECK(d.n == 2);
  CHECK(d.m == 4);
  CHECK(d.features == std::vector<double>{0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0});
  CHECK(d.labels == std::vector<int>{1, 0});
  std::remove(img.c_str());
  std::remove(lab.c_str());
}

TEST_CASE("load_idx: corrupt magic is a format error") {
  const std::string img = temp_path("pcert_idx_badmagic.bin");
  const std::string lab = temp_path("pcert_idx_badmagic_lab.bin");
  testfix::write_idx_images(img, 1, 1, 1, {7}, 0x00000000u);
  testfix::write_idx_labels(lab, {0});
  CHECK_THROWS_AS(load_idx(img, lab), FormatError);
  std::remove(img.c_str());
  std::remove(lab.c_str());
}

TEST_CASE("load_idx: count mismatch is a consistency error") {
  const std::string img = temp_path("pcert_idx_count_img.bin");
  const std::string lab = temp_path("pcert_idx_count_lab.bin");
  testfix::write_idx_images(img, 2, 1, 1, {1, 2});
  testfix::write_idx_labels(lab, {0});
  CHECK_THROWS_AS(load_idx(img, lab), DataError);
  std::remove(img.c_str());
  std::remove(lab.c_str());
}

TEST_CASE("load_idx: truncated pixel payload is an io error") {
  const std::string img = temp_path("pcert_idx_trunc_img.bin");
  const std::string lab = temp_path("pcert_idx_trunc_lab.bin");
  testfix::write_idx_images(img, 2, 2, 2, {1, 2, 3});  // 5 bytes short
  testfix::write_idx_labels(lab, {0, 1});
  CHECK_THROWS_AS(load_idx(img, lab), IoError);
  std::remove(img.c_str());
  std::remove(lab.c_str());
}

TEST_CASE("subsample: keeping everything is the identity") {
  const auto d = make_blobs(13, 30, 2, 3, 5.0);
  const auto s = subsample(d, 99, 30);
  CHECK(s.features == d.features);
  CHECK(s.labels == d.labels);
}

TEST_CASE("subsample: singleton comes from the source") {
  const auto d = make_blobs(14, 25, 2, 2, 5.0);
  const auto s = subsample(d, 1, 1);
  REQUIRE(s.n == 1);
  bool found = false;
  for (int i = 0; i < d.n && !found; ++i) {
    found = std::equal(s.row(0).begin(), s.row(0).end(), d.row(i).begin()) &&
            s.labels[0] == d.labels[i];
  }
  CHECK(found);
}

TEST_CASE("subsample: deterministic index choice and preserved order") {
  const auto d = make_blobs(15, 40, 2, 2, 5.0);
  const auto a = subsample(d, 7, 12);
  const auto b = subsample(d, 7, 12);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  CHECK_THROWS_AS(subsample(d, 7, 0), ArgumentError);
  CHECK_THROWS_AS(subsample(d, 7, 41), ArgumentError);
}
