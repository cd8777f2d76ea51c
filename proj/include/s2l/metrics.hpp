#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "s2l/error.hpp"

namespace s2l::metrics {

// Fraction of positions where pred == gold. Callers normalize answers into
// their task-native form first; an extraction miss should compare unequal.
template <typename T>
double accuracy(std::span<const T> preds, std::span<const T> golds) {
  if (preds.size() != golds.size()) {
    throw Error(ErrorKind::kArgument, "accuracy: " + std::to_string(preds.size()) +
                                          " predictions vs " + std::to_string(golds.size()) +
                                          " golds");
  }
  if (preds.empty()) throw Error(ErrorKind::kArgument, "accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == golds[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

template <typename T>
double accuracy(const std::vector<T>& preds, const std::vector<T>& golds) {
  return accuracy(std::span<const T>(preds), std::span<const T>(golds));
}

// Lowercase, drop ASCII punctuation, collapse whitespace, drop one leading
// article (a/an/the).
std::string normalize_answer(std::string_view text);

int exact_match(std::string_view pred, const std::vector<std::string>& gold_set);

double token_f1(std::string_view pred, std::string_view gold);
// Best token F1 against any member of the gold set.
double max_token_f1(std::string_view pred, const std::vector<std::string>& gold_set);

// Product-moment correlation. Throws kDegenerateInput when either side is
// constant.
double pearson(std::span<const double> xs, std::span<const double> ys);

enum class Metric { kAccuracy, kExactMatch, kF1, kPearson };

const char* to_string(Metric metric);

}  // namespace s2l::metrics
