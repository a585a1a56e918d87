#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "parmatch/model.hpp"

namespace parmatch {

// Deterministic product-offer-style dataset generator. Block sizes come
// either from explicit_sizes (entities beyond the listed sizes get no
// blocking key, i.e. land in misc) or from key_count keys with a
// Zipf-like skew and a per-entity miss_rate. A duplicate_rate fraction of
// entities are perturbed copies of earlier ones so matching finds
// non-trivial correspondence sets.
struct SyntheticSpec {
  std::uint64_t count = 1000;
  std::vector<std::uint64_t> explicit_sizes;  // non-empty selects this mode
  std::uint32_t key_count = 20;
  double zipf_skew = 1.0;
  double miss_rate = 0.1;
  double duplicate_rate = 0.2;
  std::uint64_t seed = 1;
  std::string source_id = "src";
  std::string id_prefix = "e";
};

// Same spec (including seed) always yields byte-identical entities.
std::vector<Entity> generate_entities(const SyntheticSpec& spec);

// Columns id,title,description,manufacturer,type; absent values write as
// empty fields.
void write_entities_csv(std::ostream& out, std::span<const Entity> entities);

}  // namespace parmatch
