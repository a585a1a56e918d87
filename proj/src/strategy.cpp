#include "parmatch/strategy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "parmatch/error.hpp"

namespace parmatch {
namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Left-to-right weighted sum with unknown similarities optimistically set
// to 1. Computed in the same accumulation order as the final combined
// value, so bound < threshold proves the final value stays below it in
// floating-point arithmetic as well.
double optimistic_combined(const std::vector<double>& weights,
                           std::span<const double> sims,
                           std::size_t known_count) {
  double sum = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    sum += weights[j] * (j < known_count ? sims[j] : 1.0);
  }
  return sum;
}

std::optional<double> combined_wam(const WeightedAverage& wam,
                                   const MatchStrategy& strategy,
                                   const Entity& e1, const Entity& e2) {
  std::vector<double> sims(strategy.matchers.size(), 0.0);
  for (std::size_t i = 0; i < strategy.matchers.size(); ++i) {
    sims[i] = apply_measure(strategy.matchers[i], e1, e2);
    if (wam.pruning_enabled) {
      double bound = optimistic_combined(wam.weights, sims, i + 1);
      if (bound < wam.threshold) return std::nullopt;
    }
  }
  double combined = optimistic_combined(wam.weights, sims, sims.size());
  if (combined < wam.threshold) return std::nullopt;
  return combined;
}

std::optional<double> combined_lrm(const LogisticRegression& lrm,
                                   const MatchStrategy& strategy,
                                   const Entity& e1, const Entity& e2) {
  double z = lrm.intercept;
  for (std::size_t i = 0; i < strategy.matchers.size(); ++i) {
    z += lrm.coefficients[i] * apply_measure(strategy.matchers[i], e1, e2);
  }
  double p = logistic(z);
  if (p < lrm.decision_threshold) return std::nullopt;
  return p;
}

}  // namespace

void validate_strategy(const MatchStrategy& strategy,
                       const std::set<std::string>& schema_attributes) {
  if (strategy.id.empty()) throw ConfigError("strategy.id: must be non-empty");
  if (strategy.matchers.empty()) {
    throw ConfigError("strategy.matchers: at least one matcher required");
  }
  if (strategy.pair_memory_cost == 0) {
    throw ConfigError("strategy.pair_cost: must be positive");
  }
  for (const auto& matcher : strategy.matchers) {
    if (!schema_attributes.contains(matcher.attribute)) {
      throw ConfigError("strategy.matchers: unknown attribute '" +
                        matcher.attribute + "'");
    }
  }
  if (const auto* wam = std::get_if<WeightedAverage>(&strategy.combiner)) {
    if (wam->weights.size() != strategy.matchers.size()) {
      throw ConfigError("strategy.weights: expected one weight per matcher");
    }
    double sum = 0.0;
    for (double w : wam->weights) {
      if (w <= 0.0) throw ConfigError("strategy.weights: weights must be > 0");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ConfigError("strategy.weights: weights must sum to 1");
    }
    if (wam->threshold <= 0.0 || wam->threshold > 1.0) {
      throw ConfigError("strategy.threshold: must be in (0,1]");
    }
  } else {
    const auto& lrm = std::get<LogisticRegression>(strategy.combiner);
    if (lrm.coefficients.size() != strategy.matchers.size()) {
      throw ConfigError(
          "strategy.coefficients: expected one coefficient per matcher");
    }
    if (lrm.decision_threshold <= 0.0 || lrm.decision_threshold >= 1.0) {
      throw ConfigError("strategy.decision_threshold: must be in (0,1)");
    }
  }
}

double prune_bound(const MatchStrategy& strategy, std::size_t matcher_index) {
  const auto* wam = std::get_if<WeightedAverage>(&strategy.combiner);
  if (wam == nullptr) {
    throw ConfigError("prune_bound requires a weighted-average combiner");
  }
  double w = wam->weights.at(matcher_index);
  double bound = (wam->threshold - (1.0 - w)) / w;
  return std::clamp(bound, 0.0, 1.0);
}

std::optional<Correspondence> evaluate_pair(const MatchStrategy& strategy,
                                            const Entity& e1,
                                            const Entity& e2) {
  std::optional<double> combined;
  if (const auto* wam = std::get_if<WeightedAverage>(&strategy.combiner)) {
    combined = combined_wam(*wam, strategy, e1, e2);
  } else {
    combined =
        combined_lrm(std::get<LogisticRegression>(strategy.combiner), strategy,
                     e1, e2);
  }
  if (!combined) return std::nullopt;
  return make_correspondence(key_of(e1), key_of(e2), *combined);
}

MatchResult evaluate_partition_pair(const MatchStrategy& strategy,
                                    const std::string& task_id,
                                    std::span<const Entity> a,
                                    std::span<const Entity> b,
                                    bool self_task) {
  auto start = std::chrono::steady_clock::now();
  MatchResult result;
  result.task_id = task_id;
  if (self_task) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = i + 1; j < a.size(); ++j) {
        ++result.pairs_compared;
        if (auto c = evaluate_pair(strategy, a[i], a[j])) {
          result.correspondences.push_back(std::move(*c));
        }
      }
    }
  } else {
    for (const Entity& ea : a) {
      for (const Entity& eb : b) {
        ++result.pairs_compared;
        if (auto c = evaluate_pair(strategy, ea, eb)) {
          result.correspondences.push_back(std::move(*c));
        }
      }
    }
  }
  std::sort(result.correspondences.begin(), result.correspondences.end());
  result.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return result;
}

MatchStrategy default_wam_strategy() {
  MatchStrategy strategy;
  strategy.id = "wam";
  strategy.matchers = {{MeasureKind::EditDistance, "title"},
                       {MeasureKind::Trigram, "description"}};
  strategy.combiner = WeightedAverage{{0.5, 0.5}, 0.75, true};
  strategy.pair_memory_cost = kDefaultWamPairCost;
  return strategy;
}

MatchStrategy default_lrm_strategy() {
  MatchStrategy strategy;
  strategy.id = "lrm";
  strategy.matchers = {{MeasureKind::JaccardToken, "title"},
                       {MeasureKind::Trigram, "description"},
                       {MeasureKind::CosineToken, "title"}};
  strategy.combiner = LogisticRegression{-4.0, {3.0, 3.0, 3.0}, 0.5};
  strategy.pair_memory_cost = kDefaultLrmPairCost;
  return strategy;
}

}  // namespace parmatch
