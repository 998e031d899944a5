#include <cmath>
#include <functional>

#include "doctest.h"
#include "medsynth/error.hpp"
#include "medsynth/rng.hpp"
#include "medsynth/shift_analyzer.hpp"
#include "support.hpp"

using namespace medsynth;
using namespace medsynth::shift;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

using Mat = std::vector<std::vector<double>>;

// Leading eigenvector of a symmetric matrix by power iteration.
std::vector<double> power_iteration(const Mat& a) {
  const size_t d = a.size();
  std::vector<double> v(d);
  for (size_t i = 0; i < d; ++i) v[i] = 1.0 + 0.1 * static_cast<double>(i);
  for (int it = 0; it < 5000; ++it) {
    std::vector<double> w(d, 0.0);
    for (size_t i = 0; i < d; ++i) {
      for (size_t j = 0; j < d; ++j) w[i] += a[i][j] * v[j];
    }
    double norm = 0.0;
    for (double x : w) norm += x * x;
    norm = std::sqrt(norm);
    for (size_t i = 0; i < d; ++i) v[i] = w[i] / norm;
  }
  return v;
}

void orient(std::vector<double>& v) {
  size_t arg = 0;
  for (size_t j = 1; j < v.size(); ++j) {
    if (std::abs(v[j]) > std::abs(v[arg]) + 1e-12) arg = j;
  }
  if (v[arg] < 0) {
    for (double& x : v) x = -x;
  }
}

// Two-component PCA by power iteration with deflation.
std::vector<std::pair<double, double>> oracle_pca(const Mat& x) {
  const size_t n = x.size();
  const size_t d = x[0].size();
  std::vector<double> mean(d, 0.0);
  for (const auto& row : x) {
    for (size_t j = 0; j < d; ++j) mean[j] += row[j] / static_cast<double>(n);
  }
  Mat c(n, std::vector<double>(d));
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < d; ++j) c[i][j] = x[i][j] - mean[j];
  }
  Mat cov(d, std::vector<double>(d, 0.0));
  for (size_t a = 0; a < d; ++a) {
    for (size_t b = 0; b < d; ++b) {
      for (size_t i = 0; i < n; ++i) cov[a][b] += c[i][a] * c[i][b] / static_cast<double>(n - 1);
    }
  }
  auto v1 = power_iteration(cov);
  double l1 = 0.0;
  for (size_t a = 0; a < d; ++a) {
    for (size_t b = 0; b < d; ++b) l1 += v1[a] * cov[a][b] * v1[b];
  }
  Mat deflated = cov;
  for (size_t a = 0; a < d; ++a) {
    for (size_t b = 0; b < d; ++b) deflated[a][b] -= l1 * v1[a] * v1[b];
  }
  auto v2 = power_iteration(deflated);
  orient(v1);
  orient(v2);
  std::vector<std::pair<double, double>> out;
  for (const auto& row : c) {
    double p = 0.0;
    double q = 0.0;
    for (size_t j = 0; j < d; ++j) {
      p += row[j] * v1[j];
      q += row[j] * v2[j];
    }
    out.emplace_back(p, q);
  }
  return out;
}

std::vector<LabeledVector> labeled(const Mat& x) {
  std::vector<LabeledVector> out;
  for (size_t i = 0; i < x.size(); ++i) {
    out.push_back({"v" + std::to_string(i), i % 2 ? PointSource::Synthetic : PointSource::Original, x[i]});
  }
  return out;
}

}  // namespace

TEST_CASE("JSD fixtures") {
  CHECK(ngram_js_divergence({"the cat sat", "a dog"}, {"the cat sat", "a dog"}, 1) <= 1e-9);
  CHECK(std::abs(ngram_js_divergence({"alpha beta"}, {"gamma delta"}, 1) - 1.0) <= 1e-9);
  CHECK(std::abs(ngram_js_divergence({"a b"}, {"a c"}, 1) - 0.5) <= 1e-9);
  CHECK(std::abs(ngram_js_divergence({"a b c"}, {"a b d"}, 2) - 0.5) <= 1e-9);
  CHECK(code_of([] { ngram_js_divergence({}, {"a"}, 1); }) == ErrorCode::EmptyCorpus);
  CHECK(code_of([] { ngram_js_divergence({"a"}, {"b"}, 2); }) == ErrorCode::EmptyCorpus);
}

TEST_CASE("property: JSD is symmetric and bounded") {
  SplitMix64 rng(4);
  for (int iter = 0; iter < 200; ++iter) {
    std::map<std::string, double> p;
    std::map<std::string, double> q;
    double sp = 0.0;
    double sq = 0.0;
    for (int k = 0; k < 6; ++k) {
      if (rng.bounded(2)) sp += p[std::string(1, static_cast<char>('a' + k))] = rng.uniform() + 0.01;
      if (rng.bounded(2)) sq += q[std::string(1, static_cast<char>('a' + k))] = rng.uniform() + 0.01;
    }
    if (p.empty() || q.empty()) continue;
    for (auto& [k, v] : p) v /= sp;
    for (auto& [k, v] : q) v /= sq;
    const double a = js_divergence(p, q);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
    CHECK(std::abs(a - js_divergence(q, p)) <= 1e-12);
    CHECK(js_divergence(p, p) <= 1e-12);
  }
}

TEST_CASE("corpus statistics") {
  const auto s = corpus_stats({"The cat.", "the dog sat"});
  CHECK(s.sentence_count == 2);
  CHECK(s.vocab.at("the") == 2);
  CHECK(s.length_histogram.at(3) == 2);
  double total = 0.0;
  for (const auto& [g, p] : s.ngram_dist(2)) total += p;
  CHECK(std::abs(total - 1.0) <= 1e-12);
  CHECK(std::abs(vocab_overlap({"a b"}, {"B c"}) - 1.0 / 3.0) <= 1e-12);
}

TEST_CASE("PCA on a line in 3D has a zero second component") {
  Mat x;
  for (int i = 0; i < 12; ++i) {
    const double t = 0.5 * i - 2.0;
    x.push_back({1.0 + t, -2.0 + 2.0 * t, 0.5 + 3.0 * t});
  }
  const auto p = pca_project(labeled(x));
  REQUIRE(p.points.size() == 12);
  for (const auto& pt : p.points) CHECK(std::abs(pt.y) <= 1e-9);
  CHECK(p.explained_variance[1] <= 1e-9);
  // First coordinate is the signed distance along the unit direction (1,2,3)/sqrt(14).
  for (int i = 0; i < 12; ++i) {
    const double t = 0.5 * i - 2.0 - (0.5 * 11 / 2.0 - 2.0);
    CHECK(std::abs(p.points[static_cast<size_t>(i)].x - t * std::sqrt(14.0)) <= 1e-9);
  }
}

TEST_CASE("PCA agrees with a power-iteration oracle") {
  SplitMix64 rng(17);
  const std::vector<double> scale{5.0, 3.0, 1.0, 0.5, 0.2};
  Mat x;
  for (int i = 0; i < 40; ++i) {
    std::vector<double> row;
    for (double s : scale) row.push_back(s * (rng.uniform() - 0.5));
    x.push_back(row);
  }
  const auto want = oracle_pca(x);
  const auto got = pca_project(labeled(x));
  for (size_t i = 0; i < x.size(); ++i) {
    CHECK(std::abs(got.points[i].x - want[i].first) <= 1e-6);
    CHECK(std::abs(got.points[i].y - want[i].second) <= 1e-6);
    CHECK(got.points[i].id == "v" + std::to_string(i));
  }
  CHECK(got.explained_variance[0] >= got.explained_variance[1]);
}

TEST_CASE("PCA input checks and degenerate input") {
  CHECK(code_of([] { pca_project({{"a", PointSource::Original, {1, 2}}}); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] {
          pca_project({{"a", PointSource::Original, {1, 2}}, {"b", PointSource::Original, {1, 2, 3}}});
        }) == ErrorCode::DimensionMismatch);
  CHECK(code_of([] {
          pca_project({{"a", PointSource::Original, {1}}, {"b", PointSource::Original, {2}}});
        }) == ErrorCode::DimensionMismatch);
  CHECK(code_of([] {
          pca_project({{"a", PointSource::Original, {1, NAN}}, {"b", PointSource::Original, {2, 3}}});
        }) == ErrorCode::InvalidArgument);
  const auto d = pca_project({{"a", PointSource::Original, {1, 2}}, {"b", PointSource::Synthetic, {1, 2}}});
  CHECK(d.degenerate);
  CHECK(d.points[1].x == 0.0);
  CHECK(d.points[1].source == PointSource::Synthetic);
}

TEST_CASE("hashed vectors are unit length and deterministic") {
  const auto v = hashed_vector("Patients with asthma");
  CHECK(v.size() == kHashedDim);
  double norm = 0.0;
  for (double x : v) norm += x * x;
  CHECK(std::abs(norm - 1.0) <= 1e-12);
  CHECK(v == hashed_vector("patients WITH asthma"));
}

TEST_CASE("embedding and scatter files") {
  std::vector<LabeledVector> vs{{"o0", PointSource::Original, {0.1, 1.0 / 3.0}}, {"o1", PointSource::Original, {-2, 5e-20}}};
  const auto back = parse_embedding_file(embedding_file(vs), PointSource::Original);
  REQUIRE(back.size() == 2);
  CHECK(back[0].values == vs[0].values);
  CHECK(back[1].values == vs[1].values);
  CHECK(code_of([] { parse_embedding_file("no tab here", PointSource::Original); }) == ErrorCode::MalformedLine);
  CHECK(code_of([] { parse_embedding_file("a\t1,x", PointSource::Original); }) == ErrorCode::MalformedLine);
  const auto tsv = scatter_tsv(pca_project(vs));
  CHECK(tsv.rfind("x\ty\tsource\tid\n", 0) == 0);
  CHECK(tsv.find("\toriginal\to1\n") != std::string::npos);
}

TEST_CASE("shift report") {
  const auto r = shift_report({"Patients with asthma.", "A cohort of adults."}, {"Patients with asthma.", "New text."});
  CHECK(r.at("exact_overlap_rate").get<double>() == doctest::Approx(0.5));
  CHECK(r.at("jsd_1").get<double>() > 0.0);
  CHECK(r.at("jsd_1").get<double>() < 1.0);
  CHECK(r.contains("vocab_overlap"));
}
