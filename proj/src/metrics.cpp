#include "s2l/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "s2l/text.hpp"

namespace s2l::metrics {

std::string normalize_answer(std::string_view text) {
  std::string stripped;
  stripped.reserve(text.size());
  for (char c : text) {
    auto u = static_cast<unsigned char>(c);
    if (std::ispunct(u)) continue;
    stripped += static_cast<char>(std::tolower(u));
  }
  auto tokens = text::split_whitespace(stripped);
  std::size_t first = 0;
  if (!tokens.empty() && (tokens[0] == "a" || tokens[0] == "an" || tokens[0] == "the")) first = 1;
  std::string out;
  for (std::size_t i = first; i < tokens.size(); ++i) {
    if (!out.empty()) out += ' ';
    out += tokens[i];
  }
  return out;
}

int exact_match(std::string_view pred, const std::vector<std::string>& gold_set) {
  if (gold_set.empty()) throw Error(ErrorKind::kArgument, "exact_match: empty gold set");
  std::string p = normalize_answer(pred);
  for (const auto& gold : gold_set) {
    if (normalize_answer(gold) == p) return 1;
  }
  return 0;
}

double token_f1(std::string_view pred, std::string_view gold) {
  std::string p = normalize_answer(pred);
  std::string g = normalize_answer(gold);
  auto pred_tokens = text::split_whitespace(p);
  auto gold_tokens = text::split_whitespace(g);
  if (pred_tokens.empty() && gold_tokens.empty()) return 1.0;
  if (pred_tokens.empty() || gold_tokens.empty()) return 0.0;
  std::map<std::string_view, int> gold_counts;
  for (auto t : gold_tokens) ++gold_counts[t];
  int common = 0;
  for (auto t : pred_tokens) {
    auto it = gold_counts.find(t);
    if (it != gold_counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  double precision = static_cast<double>(common) / static_cast<double>(pred_tokens.size());
  double recall = static_cast<double>(common) / static_cast<double>(gold_tokens.size());
  return 2.0 * precision * recall / (precision + recall);
}

double max_token_f1(std::string_view pred, const std::vector<std::string>& gold_set) {
  if (gold_set.empty()) throw Error(ErrorKind::kArgument, "token_f1: empty gold set");
  double best = 0.0;
  for (const auto& gold : gold_set) best = std::max(best, token_f1(pred, gold));
  return best;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw Error(ErrorKind::kArgument, "pearson: lengths differ (" + std::to_string(xs.size()) +
                                          " vs " + std::to_string(ys.size()) + ")");
  }
  if (xs.size() < 2) throw Error(ErrorKind::kArgument, "pearson: need at least two points");
  const auto n = static_cast<double>(xs.size());
  double mean_x = 0, mean_y = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mean_x += xs[i];
    mean_y += ys[i];
  }
  mean_x /= n;
  mean_y /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double dx = xs[i] - mean_x;
    double dy = ys[i] - mean_y;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw Error(ErrorKind::kDegenerateInput, "pearson: zero variance; correlation is undefined");
  }
  double r = sxy / (std::sqrt(sxx) * std::sqrt(syy));
  return std::clamp(r, -1.0, 1.0);
}

const char* to_string(Metric metric) {
  switch (metric) {
    case Metric::kAccuracy: return "acc";
    case Metric::kExactMatch: return "em";
    case Metric::kF1: return "f1";
    case Metric::kPearson: return "pearson";
  }
  return "acc";
}

}  // namespace s2l::metrics
