#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "parmatch/model.hpp"
#include "parmatch/similarity.hpp"

namespace parmatch {

inline constexpr std::uint64_t kDefaultWamPairCost = 20;    // bytes per pair
inline constexpr std::uint64_t kDefaultLrmPairCost = 1000;  // bytes per pair

struct WeightedAverage {
  std::vector<double> weights;  // one per matcher, positive, sum to 1
  double threshold = 0.75;      // match iff combined >= threshold
  bool pruning_enabled = true;
};

struct LogisticRegression {
  double intercept = 0.0;
  std::vector<double> coefficients;  // one per matcher
  double decision_threshold = 0.5;   // match iff sigma(z) >= threshold
};

// A set of matchers plus the rule combining their similarities into a
// match decision. pair_memory_cost is the declared c_ms used by sizing.
struct MatchStrategy {
  std::string id;
  std::vector<SimilarityMeasure> matchers;
  std::variant<WeightedAverage, LogisticRegression> combiner;
  std::uint64_t pair_memory_cost = kDefaultWamPairCost;

  bool is_weighted_average() const {
    return std::holds_alternative<WeightedAverage>(combiner);
  }
};

// Checks structural invariants and that every matcher attribute is known
// to the schema. Throws ConfigError naming the offending field.
void validate_strategy(const MatchStrategy& strategy,
                       const std::set<std::string>& schema_attributes);

// Lower bound for matcher i of a weighted-average strategy: a pair whose
// matcher-i similarity falls below the bound cannot reach the combined
// threshold even if every other matcher returns 1. Clamped to [0,1].
double prune_bound(const MatchStrategy& strategy, std::size_t matcher_index);

// Evaluates one entity pair. Returns a canonical correspondence iff the
// combined similarity meets the strategy's threshold.
std::optional<Correspondence> evaluate_pair(const MatchStrategy& strategy,
                                            const Entity& e1,
                                            const Entity& e2);

// Compares every pair across A and B (every unordered pair within A for a
// self task) and collects the matching correspondences, sorted.
MatchResult evaluate_partition_pair(const MatchStrategy& strategy,
                                    const std::string& task_id,
                                    std::span<const Entity> a,
                                    std::span<const Entity> b, bool self_task);

// Built-in strategy presets used by the CLI defaults.
MatchStrategy default_wam_strategy();
MatchStrategy default_lrm_strategy();

}  // namespace parmatch
