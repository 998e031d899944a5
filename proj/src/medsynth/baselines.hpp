#pragma once

#include <map>
#include <string>
#include <vector>

#include "medsynth/corpus.hpp"

// Deterministic stand-ins for fine-tuned models, used as learning-curve eval
// hooks when no external prediction files are supplied.
namespace medsynth::baseline {

// Memorizes every entity surface in the training corpus and tags by greedy
// longest match, left to right, case-insensitively.
class Gazetteer {
 public:
  explicit Gazetteer(const std::vector<corpus::TaggedSentence>& train);
  std::vector<corpus::Tag> tag(const std::vector<corpus::Token>& tokens) const;
  size_t size() const { return entries_.size(); }

 private:
  std::map<std::vector<std::string>, std::string> entries_;  // lowercased tokens -> type
  size_t longest_ = 0;
};

// 1-nearest neighbour over hashed bag-of-words vectors, cosine similarity;
// ties go to the earliest training example.
class NearestNeighbor {
 public:
  explicit NearestNeighbor(const std::vector<corpus::REExample>& train);
  corpus::Label predict(const std::string& sentence) const;

 private:
  std::vector<std::vector<double>> vectors_;
  std::vector<corpus::Label> labels_;
};

}  // namespace medsynth::baseline
