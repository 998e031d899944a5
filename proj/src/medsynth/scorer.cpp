#include "medsynth/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "medsynth/error.hpp"
#include "medsynth/text.hpp"

namespace medsynth::score {

using json = nlohmann::json;

Metrics Metrics::from_counts(size_t tp, size_t fp, size_t fn) {
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  m.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

json Metrics::to_json() const {
  return json{{"tp", tp}, {"fp", fp}, {"fn", fn}, {"precision", precision}, {"recall", recall}, {"f1", f1}};
}

Metrics span_prf(const std::vector<corpus::TaggedSentence>& gold, const std::vector<std::vector<corpus::Tag>>& pred) {
  if (gold.size() != pred.size()) {
    throw Error(ErrorCode::ShapeMismatch, "gold has " + std::to_string(gold.size()) + " sentences, predictions " +
                                              std::to_string(pred.size()));
  }
  size_t tp = 0;
  size_t fp = 0;
  size_t fn = 0;
  for (size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].tags.size() != pred[i].size()) {
      throw Error(ErrorCode::ShapeMismatch, "sentence " + std::to_string(i) + ": " + std::to_string(gold[i].tags.size()) +
                                                " gold tags vs " + std::to_string(pred[i].size()) + " predicted");
    }
    // Both lists come out sorted by start and non-overlapping.
    const auto g = corpus::spans_from_tags(gold[i].tags);
    const auto p = corpus::spans_from_tags(pred[i]);
    size_t a = 0;
    size_t b = 0;
    size_t matched = 0;
    while (a < g.size() && b < p.size()) {
      if (g[a] == p[b]) {
        ++matched;
        ++a;
        ++b;
      } else if (g[a] < p[b]) {
        ++a;
      } else {
        ++b;
      }
    }
    tp += matched;
    fp += p.size() - matched;
    fn += g.size() - matched;
  }
  return Metrics::from_counts(tp, fp, fn);
}

Metrics cls_prf(const std::vector<corpus::Label>& gold, const std::vector<corpus::Label>& pred) {
  if (gold.size() != pred.size()) {
    throw Error(ErrorCode::LengthMismatch, "gold has " + std::to_string(gold.size()) + " labels, predictions " +
                                               std::to_string(pred.size()));
  }
  size_t tp = 0;
  size_t fp = 0;
  size_t fn = 0;
  for (size_t i = 0; i < gold.size(); ++i) {
    const bool g = gold[i] == corpus::Label::Yes;
    const bool p = pred[i] == corpus::Label::Yes;
    tp += g && p;
    fp += !g && p;
    fn += g && !p;
  }
  return Metrics::from_counts(tp, fp, fn);
}

namespace {

Moments moments(const std::vector<double>& xs) {
  Moments m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return m;
}

}  // namespace

TrialSummary aggregate_trials(const std::vector<Metrics>& trials) {
  if (trials.empty()) throw Error(ErrorCode::EmptyInput, "no trials to aggregate");
  TrialSummary s;
  s.trials = trials;
  std::vector<double> p, r, f;
  for (const auto& m : trials) {
    p.push_back(m.precision);
    r.push_back(m.recall);
    f.push_back(m.f1);
  }
  s.precision = moments(p);
  s.recall = moments(r);
  s.f1 = moments(f);
  return s;
}

std::vector<double> parse_grid(const std::string& grid) {
  const std::string s = text::trim(grid);
  std::vector<double> out;
  if (s.empty()) return out;
  auto number = [&](const std::string& x) {
    try {
      size_t used = 0;
      const double v = std::stod(text::trim(x), &used);
      if (used != text::trim(x).size()) throw std::invalid_argument(x);
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, "bad grid value '" + x + "'");
    }
  };
  if (s.find(':') != std::string::npos) {
    const auto parts = text::split(s, ':');
    if (parts.size() != 3) throw Error(ErrorCode::ConfigError, "range grid must be start:stop:step");
    const double start = number(parts[0]);
    const double stop = number(parts[1]);
    const double step = number(parts[2]);
    if (!(step > 0.0)) throw Error(ErrorCode::ConfigError, "grid step must be positive");
    const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(start + static_cast<double>(i) * step);
    return out;
  }
  for (const auto& part : text::split(s, ',')) out.push_back(number(part));
  return out;
}

std::vector<CurvePoint> learning_curve(const std::vector<double>& grid, int trials, const EvalHook& hook) {
  if (trials < 1) throw Error(ErrorCode::InvalidArgument, "trials must be at least 1");
  std::vector<CurvePoint> out;
  for (double x : grid) {
    CurvePoint point;
    point.x = x;
    try {
      std::vector<Metrics> ms;
      for (int t = 0; t < trials; ++t) ms.push_back(hook(x, t));
      point.summary = aggregate_trials(ms);
    } catch (const Error& e) {
      point.error = std::string(error_class_name(e.code())) + ": " + e.what();
    } catch (const std::exception& e) {
      point.error = std::string("InternalError: ") + e.what();
    }
    out.push_back(std::move(point));
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt_x(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

std::string curve_tsv(const std::vector<CurvePoint>& points) {
  std::string out = "x\ttrial\ttp\tfp\tfn\tprecision\trecall\tf1\tf1_mean\tf1_std\terror\n";
  for (const auto& p : points) {
    if (!p.summary) {
      out += fmt_x(p.x) + "\t-\t-\t-\t-\t-\t-\t-\t-\t-\t" + p.error.value_or("") + "\n";
      continue;
    }
    for (size_t t = 0; t < p.summary->trials.size(); ++t) {
      const auto& m = p.summary->trials[t];
      out += fmt_x(p.x) + "\t" + std::to_string(t) + "\t" + std::to_string(m.tp) + "\t" + std::to_string(m.fp) + "\t" +
             std::to_string(m.fn) + "\t" + fmt(m.precision) + "\t" + fmt(m.recall) + "\t" + fmt(m.f1) + "\t" +
             fmt(p.summary->f1.mean) + "\t" + fmt(p.summary->f1.std) + "\t\n";
    }
  }
  return out;
}

std::string metrics_tsv(const Metrics& m) {
  return "tp\tfp\tfn\tprecision\trecall\tf1\n" + std::to_string(m.tp) + "\t" + std::to_string(m.fp) + "\t" +
         std::to_string(m.fn) + "\t" + fmt(m.precision) + "\t" + fmt(m.recall) + "\t" + fmt(m.f1) + "\n";
}

std::vector<Prediction> parse_predictions(std::string_view jsonl) {
  std::vector<Prediction> out;
  const auto lines = text::split_lines(jsonl);
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    if (text::trim(lines[ln]).empty()) continue;
    try {
      const json j = json::parse(lines[ln]);
      Prediction p;
      p.id = j.at("id").get<size_t>();
      if (j.contains("tags")) {
        for (const auto& t : j.at("tags")) {
          auto tag = corpus::parse_tag(t.get<std::string>());
          if (!tag) throw ParseError(ErrorCode::UnknownTag, ln + 1, 1, "unknown tag '" + t.get<std::string>() + "'");
          p.tags.push_back(std::move(*tag));
        }
      }
      if (j.contains("label") && !j.at("label").is_null()) {
        auto label = corpus::normalize_label(j.at("label").get<std::string>());
        if (!label) throw ParseError(ErrorCode::BadLabel, ln + 1, 1, "label is not Yes/No");
        p.label = *label;
      }
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw ParseError(ErrorCode::MalformedLine, ln + 1, 1, e.what());
    }
  }
  return out;
}

Metrics score_file(const corpus::Dataset& gold, const std::vector<Prediction>& predictions) {
  std::vector<const Prediction*> by_id(gold.size(), nullptr);
  for (const auto& p : predictions) {
    if (p.id >= gold.size()) throw Error(ErrorCode::ShapeMismatch, "prediction id " + std::to_string(p.id) + " out of range");
    if (by_id[p.id]) throw Error(ErrorCode::ShapeMismatch, "duplicate prediction id " + std::to_string(p.id));
    by_id[p.id] = &p;
  }
  for (size_t i = 0; i < by_id.size(); ++i) {
    if (!by_id[i]) throw Error(ErrorCode::ShapeMismatch, "no prediction for item " + std::to_string(i));
  }
  if (gold.task == corpus::Task::NER) {
    std::vector<std::vector<corpus::Tag>> pred;
    for (const auto* p : by_id) pred.push_back(p->tags);
    return span_prf(gold.sentences, pred);
  }
  std::vector<corpus::Label> g;
  std::vector<corpus::Label> p;
  for (size_t i = 0; i < gold.relations.size(); ++i) {
    g.push_back(gold.relations[i].label);
    if (!by_id[i]->label) throw Error(ErrorCode::ShapeMismatch, "prediction " + std::to_string(i) + " lacks a label");
    p.push_back(*by_id[i]->label);
  }
  return cls_prf(g, p);
}

}  // namespace medsynth::score
