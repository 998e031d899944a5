#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "medsynth/corpus.hpp"

namespace medsynth::score {

struct Metrics {
  size_t tp = 0;
  size_t fp = 0;
  size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static Metrics from_counts(size_t tp, size_t fp, size_t fn);
  nlohmann::json to_json() const;
};

// Exact (start, end, type) matches, micro-averaged over sentences.
Metrics span_prf(const std::vector<corpus::TaggedSentence>& gold, const std::vector<std::vector<corpus::Tag>>& pred);
// Positive class is Yes.
Metrics cls_prf(const std::vector<corpus::Label>& gold, const std::vector<corpus::Label>& pred);

struct Moments {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single trial
};

struct TrialSummary {
  std::vector<Metrics> trials;
  Moments precision;
  Moments recall;
  Moments f1;
};

TrialSummary aggregate_trials(const std::vector<Metrics>& trials);

// "1,2,3" or "start:stop:step" (inclusive of stop when it lies on the grid).
std::vector<double> parse_grid(const std::string& grid);

struct CurvePoint {
  double x = 0.0;
  std::optional<TrialSummary> summary;
  std::optional<std::string> error;  // hook failure at this point
};

using EvalHook = std::function<Metrics(double x, int trial)>;

// One point per grid value; hook failures are recorded per point.
std::vector<CurvePoint> learning_curve(const std::vector<double>& grid, int trials, const EvalHook& hook);

// Tab-separated, one row per (point, trial) plus summary columns.
std::string curve_tsv(const std::vector<CurvePoint>& points);
std::string metrics_tsv(const Metrics& m);

// Prediction JSONL: {"id": n, "tags": [...]} for NER, {"id": n, "label": "Yes"} for RE.
struct Prediction {
  size_t id = 0;
  std::vector<corpus::Tag> tags;
  std::optional<corpus::Label> label;
};

std::vector<Prediction> parse_predictions(std::string_view jsonl);
// Orders predictions by id against the gold size; missing ids are an error.
Metrics score_file(const corpus::Dataset& gold, const std::vector<Prediction>& predictions);

}  // namespace medsynth::score
