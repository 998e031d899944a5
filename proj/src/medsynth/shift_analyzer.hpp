#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace medsynth::shift {

enum class PointSource { Original, Synthetic };
std::string_view to_string(PointSource s);
PointSource parse_point_source(std::string_view s);

// A corpus here is a list of raw sentences; tokens are lowercased output of
// corpus::tokenize.
using Corpus = std::vector<std::string>;

struct CorpusStats {
  std::map<std::string, size_t> vocab;
  std::map<size_t, size_t> length_histogram;
  size_t sentence_count = 0;

  // Probability distribution over space-joined n-grams; sums to 1.
  std::map<std::string, double> ngram_dist(int n) const;

  std::vector<std::vector<std::string>> tokenized;
};

CorpusStats corpus_stats(const Corpus& corpus);

// Base-2 Jensen-Shannon divergence between the n-gram distributions; [0, 1].
double ngram_js_divergence(const Corpus& a, const Corpus& b, int n);
double js_divergence(const std::map<std::string, double>& p, const std::map<std::string, double>& q);

// Jaccard of the token type sets.
double vocab_overlap(const Corpus& a, const Corpus& b);

struct ProjectedPoint {
  double x = 0.0;
  double y = 0.0;
  PointSource source = PointSource::Original;
  std::string id;
};

struct ProjectionSet {
  std::vector<ProjectedPoint> points;
  bool degenerate = false;  // all inputs identical; every point at the origin
  double explained_variance[2] = {0.0, 0.0};
};

struct LabeledVector {
  std::string id;
  PointSource source = PointSource::Original;
  std::vector<double> values;
};

// Mean-centred PCA to two components. Each component's largest-magnitude
// coordinate is made positive.
ProjectionSet pca_project(const std::vector<LabeledVector>& vectors);

inline constexpr size_t kHashedDim = 256;
// Token counts hashed into 256 buckets (FNV-1a), L2-normalized.
std::vector<double> hashed_vector(const std::string& sentence, size_t dim = kHashedDim);

// "id<TAB>v1,v2,...,vk" per line.
std::vector<LabeledVector> parse_embedding_file(std::string_view content, PointSource source);
std::string embedding_file(const std::vector<LabeledVector>& vectors);

// Header "x\ty\tsource\tid", rows in input order.
std::string scatter_tsv(const ProjectionSet& set);
void export_scatter(const ProjectionSet& set, const std::string& path);

nlohmann::json shift_report(const Corpus& original, const Corpus& synthetic);

}  // namespace medsynth::shift
