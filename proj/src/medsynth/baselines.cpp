#include "medsynth/baselines.hpp"

#include "medsynth/error.hpp"
#include "medsynth/shift_analyzer.hpp"
#include "medsynth/text.hpp"

namespace medsynth::baseline {

using corpus::Tag;

Gazetteer::Gazetteer(const std::vector<corpus::TaggedSentence>& train) {
  for (const auto& s : train) {
    for (const auto& span : corpus::spans_from_tags(s.tags)) {
      std::vector<std::string> key;
      for (size_t i = span.start; i <= span.end; ++i) key.push_back(text::lowercase(s.tokens[i].text));
      longest_ = std::max(longest_, key.size());
      entries_.emplace(std::move(key), span.entity_type);  // first type seen wins
    }
  }
}

std::vector<Tag> Gazetteer::tag(const std::vector<corpus::Token>& tokens) const {
  std::vector<Tag> tags(tokens.size());
  std::vector<std::string> lower;
  for (const auto& t : tokens) lower.push_back(text::lowercase(t.text));
  size_t i = 0;
  while (i < lower.size()) {
    size_t matched = 0;
    const std::string* type = nullptr;
    for (size_t len = std::min(longest_, lower.size() - i); len > 0; --len) {
      auto it = entries_.find(std::vector<std::string>(lower.begin() + static_cast<long>(i),
                                                       lower.begin() + static_cast<long>(i + len)));
      if (it != entries_.end()) {
        matched = len;
        type = &it->second;
        break;
      }
    }
    if (!matched) {
      ++i;
      continue;
    }
    tags[i] = Tag::begin(*type);
    for (size_t k = 1; k < matched; ++k) tags[i + k] = Tag::inside(*type);
    i += matched;
  }
  return tags;
}

NearestNeighbor::NearestNeighbor(const std::vector<corpus::REExample>& train) {
  if (train.empty()) throw Error(ErrorCode::EmptyInput, "nearest-neighbour baseline needs training examples");
  for (const auto& ex : train) {
    vectors_.push_back(shift::hashed_vector(ex.sentence));
    labels_.push_back(ex.label);
  }
}

corpus::Label NearestNeighbor::predict(const std::string& sentence) const {
  const auto q = shift::hashed_vector(sentence);
  size_t best = 0;
  double best_sim = -2.0;
  for (size_t i = 0; i < vectors_.size(); ++i) {
    double sim = 0.0;
    for (size_t d = 0; d < q.size(); ++d) sim += q[d] * vectors_[i][d];
    if (sim > best_sim) {
      best_sim = sim;
      best = i;
    }
  }
  return labels_[best];
}

}  // namespace medsynth::baseline
