#include "medsynth/shift_analyzer.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <set>

#include "medsynth/corpus.hpp"
#include "medsynth/error.hpp"
#include "medsynth/quality_gate.hpp"
#include "medsynth/text.hpp"

namespace medsynth::shift {

using json = nlohmann::json;

std::string_view to_string(PointSource s) { return s == PointSource::Original ? "original" : "synthetic"; }

PointSource parse_point_source(std::string_view s) {
  if (s == "original") return PointSource::Original;
  if (s == "synthetic") return PointSource::Synthetic;
  throw Error(ErrorCode::InvalidArgument, "unknown point source '" + std::string(s) + "'");
}

namespace {

std::vector<std::string> lowered_tokens(const std::string& sentence) {
  std::vector<std::string> out;
  for (const auto& t : corpus::tokenize(sentence)) out.push_back(text::lowercase(t.text));
  return out;
}

}  // namespace

CorpusStats corpus_stats(const Corpus& c) {
  CorpusStats s;
  s.sentence_count = c.size();
  for (const auto& sentence : c) {
    auto tokens = lowered_tokens(sentence);
    ++s.length_histogram[tokens.size()];
    for (const auto& t : tokens) ++s.vocab[t];
    s.tokenized.push_back(std::move(tokens));
  }
  return s;
}

std::map<std::string, double> CorpusStats::ngram_dist(int n) const {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "n-gram order must be at least 1");
  std::map<std::string, size_t> counts;
  size_t total = 0;
  const auto k = static_cast<size_t>(n);
  for (const auto& tokens : tokenized) {
    for (size_t i = 0; i + k <= tokens.size(); ++i) {
      std::string g = tokens[i];
      for (size_t j = 1; j < k; ++j) g += " " + tokens[i + j];
      ++counts[g];
      ++total;
    }
  }
  std::map<std::string, double> dist;
  for (const auto& [g, c] : counts) dist[g] = static_cast<double>(c) / static_cast<double>(total);
  return dist;
}

double js_divergence(const std::map<std::string, double>& p, const std::map<std::string, double>& q) {
  // Terms where one side is zero reduce to x * log2(2) / 2 per side.
  double sum = 0.0;
  auto ip = p.begin();
  auto iq = q.begin();
  auto term = [](double x, double m) { return x > 0.0 ? x * std::log2(x / m) : 0.0; };
  while (ip != p.end() || iq != q.end()) {
    double px = 0.0;
    double qx = 0.0;
    if (iq == q.end() || (ip != p.end() && ip->first < iq->first)) {
      px = (ip++)->second;
    } else if (ip == p.end() || iq->first < ip->first) {
      qx = (iq++)->second;
    } else {
      px = (ip++)->second;
      qx = (iq++)->second;
    }
    const double m = 0.5 * (px + qx);
    sum += 0.5 * term(px, m) + 0.5 * term(qx, m);
  }
  return std::clamp(sum, 0.0, 1.0);
}

double ngram_js_divergence(const Corpus& a, const Corpus& b, int n) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyCorpus, "both corpora must be non-empty");
  const auto p = corpus_stats(a).ngram_dist(n);
  const auto q = corpus_stats(b).ngram_dist(n);
  if (p.empty() || q.empty()) {
    throw Error(ErrorCode::EmptyCorpus, "a corpus has no " + std::to_string(n) + "-grams");
  }
  return js_divergence(p, q);
}

double vocab_overlap(const Corpus& a, const Corpus& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyCorpus, "both corpora must be non-empty");
  std::set<std::string> sa;
  std::set<std::string> sb;
  for (const auto& s : a) {
    for (auto& t : lowered_tokens(s)) sa.insert(std::move(t));
  }
  for (const auto& s : b) {
    for (auto& t : lowered_tokens(s)) sb.insert(std::move(t));
  }
  if (sa.empty() && sb.empty()) throw Error(ErrorCode::EmptyCorpus, "corpora contain no tokens");
  size_t inter = 0;
  for (const auto& t : sa) inter += sb.count(t);
  return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

ProjectionSet pca_project(const std::vector<LabeledVector>& vectors) {
  if (vectors.size() < 2) throw Error(ErrorCode::InvalidArgument, "PCA needs at least two vectors");
  const size_t dim = vectors.front().values.size();
  if (dim < 2) throw Error(ErrorCode::DimensionMismatch, "vectors need at least two dimensions");
  for (const auto& v : vectors) {
    if (v.values.size() != dim) {
      throw Error(ErrorCode::DimensionMismatch, "vector '" + v.id + "' has " + std::to_string(v.values.size()) +
                                                    " dimensions, expected " + std::to_string(dim));
    }
    for (double x : v.values) {
      if (!std::isfinite(x)) throw Error(ErrorCode::InvalidArgument, "vector '" + v.id + "' has a non-finite value");
    }
  }
  const auto n = static_cast<Eigen::Index>(vectors.size());
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd data(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) data(i, j) = vectors[static_cast<size_t>(i)].values[static_cast<size_t>(j)];
  }
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - mean;

  ProjectionSet out;
  const double spread = centered.cwiseAbs().maxCoeff();
  if (spread == 0.0) {
    out.degenerate = true;
    for (const auto& v : vectors) out.points.push_back({0.0, 0.0, v.source, v.id});
    return out;
  }
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::Internal, "eigendecomposition failed");
  // Eigenvalues ascend; the last two columns are the leading components.
  Eigen::MatrixXd components(d, 2);
  for (int c = 0; c < 2; ++c) {
    Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - c);
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      // Ties resolve to the earliest coordinate; 1e-12 absorbs rounding between equal magnitudes.
      if (std::abs(v(j)) > best + 1e-12) {
        best = std::abs(v(j));
        arg = j;
      }
    }
    if (v(arg) < 0) v = -v;
    components.col(c) = v;
    out.explained_variance[c] = std::max(0.0, solver.eigenvalues()(d - 1 - c));
  }
  const Eigen::MatrixXd projected = centered * components;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& v = vectors[static_cast<size_t>(i)];
    out.points.push_back({projected(i, 0), projected(i, 1), v.source, v.id});
  }
  return out;
}

std::vector<double> hashed_vector(const std::string& sentence, size_t dim) {
  std::vector<double> v(dim, 0.0);
  for (const auto& t : lowered_tokens(sentence)) v[text::fnv1a64(t) % dim] += 1.0;
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

std::vector<LabeledVector> parse_embedding_file(std::string_view content, PointSource source) {
  std::vector<LabeledVector> out;
  const auto lines = text::split_lines(content);
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    if (text::trim(lines[ln]).empty()) continue;
    const size_t tab = lines[ln].find('\t');
    if (tab == std::string::npos) throw ParseError(ErrorCode::MalformedLine, ln + 1, 1, "expected id<TAB>values");
    LabeledVector v;
    v.id = lines[ln].substr(0, tab);
    v.source = source;
    for (const auto& field : text::split(lines[ln].substr(tab + 1), ',')) {
      try {
        size_t used = 0;
        const std::string f = text::trim(field);
        v.values.push_back(std::stod(f, &used));
        if (used != f.size()) throw std::invalid_argument(f);
      } catch (const std::exception&) {
        throw ParseError(ErrorCode::MalformedLine, ln + 1, tab + 2, "bad vector component '" + field + "'");
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::string embedding_file(const std::vector<LabeledVector>& vectors) {
  std::string out;
  char buf[32];
  for (const auto& v : vectors) {
    out += v.id + "\t";
    for (size_t i = 0; i < v.values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", v.values[i]);
      if (i) out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::string scatter_tsv(const ProjectionSet& set) {
  std::string out = "x\ty\tsource\tid\n";
  char buf[64];
  for (const auto& p : set.points) {
    std::snprintf(buf, sizeof buf, "%.9g\t%.9g\t", p.x, p.y);
    out += buf;
    out += std::string(to_string(p.source)) + "\t" + p.id + "\n";
  }
  return out;
}

void export_scatter(const ProjectionSet& set, const std::string& path) { corpus::write_file(path, scatter_tsv(set)); }

json shift_report(const Corpus& original, const Corpus& synthetic) {
  const auto so = corpus_stats(original);
  const auto ss = corpus_stats(synthetic);
  auto mean_length = [](const CorpusStats& s) {
    double total = 0.0;
    for (const auto& [len, count] : s.length_histogram) total += static_cast<double>(len * count);
    return s.sentence_count ? total / static_cast<double>(s.sentence_count) : 0.0;
  };
  json report{{"original_sentences", original.size()},
              {"synthetic_sentences", synthetic.size()},
              {"original_vocab", so.vocab.size()},
              {"synthetic_vocab", ss.vocab.size()},
              {"original_mean_length", mean_length(so)},
              {"synthetic_mean_length", mean_length(ss)},
              {"vocab_overlap", vocab_overlap(original, synthetic)},
              {"exact_overlap_rate", gate::exact_overlap_rate(synthetic, original)}};
  for (int n : {1, 2}) {
    try {
      report["jsd_" + std::to_string(n)] = ngram_js_divergence(original, synthetic, n);
    } catch (const Error&) {
      report["jsd_" + std::to_string(n)] = nullptr;
    }
  }
  return report;
}

}  // namespace medsynth::shift
