#include "parmatch/synthetic.hpp"

#include <cmath>
#include <ostream>
#include <random>

#include "parmatch/csv.hpp"
#include "parmatch/error.hpp"

namespace parmatch {
namespace {

constexpr const char* kBrands[] = {
    "acme",   "nordwind", "kodo",  "veltex", "ionflux", "parsec",
    "quanta", "helix",    "orbit", "zephyr", "lumen",   "vertex"};

constexpr const char* kNouns[] = {
    "drive",  "dock",    "adapter", "enclosure", "hub",    "cable",
    "reader", "charger", "mount",   "panel",     "sensor", "module",
    "router", "switch",  "camera",  "speaker"};

constexpr const char* kWords[] = {
    "compact", "external", "portable", "wireless", "gigabit", "optical",
    "silent",  "rugged",   "slim",     "dual",     "rapid",   "universal",
    "steel",   "carbon",   "matte",    "glossy",   "indoor",  "outdoor"};

std::uint64_t below(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

double unit_real(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <std::size_t N>
const char* pick(std::mt19937_64& rng, const char* const (&table)[N]) {
  return table[below(rng, N)];
}

std::string make_title(std::mt19937_64& rng) {
  std::string title = pick(rng, kBrands);
  title += ' ';
  title += pick(rng, kWords);
  title += ' ';
  title += pick(rng, kNouns);
  title += ' ';
  title += std::to_string(100 + below(rng, 900));
  return title;
}

std::string make_description(std::mt19937_64& rng) {
  std::size_t words = 4 + below(rng, 4);
  std::string description;
  for (std::size_t i = 0; i < words; ++i) {
    if (i > 0) description += ' ';
    description += pick(rng, kWords);
  }
  description += ' ';
  description += pick(rng, kNouns);
  return description;
}

// A realistic near-duplicate: small typos in title and description.
void perturb(std::mt19937_64& rng, std::string& text) {
  if (text.empty()) return;
  switch (below(rng, 3)) {
    case 0: {  // replace one character
      text[below(rng, text.size())] =
          static_cast<char>('a' + below(rng, 26));
      break;
    }
    case 1: {  // drop one character
      text.erase(below(rng, text.size()), 1);
      break;
    }
    default: {  // swap two adjacent characters
      if (text.size() >= 2) {
        std::size_t i = below(rng, text.size() - 1);
        std::swap(text[i], text[i + 1]);
      }
      break;
    }
  }
}

std::string pad_id(std::uint64_t value) {
  std::string digits = std::to_string(value);
  if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
  return digits;
}

}  // namespace

std::vector<Entity> generate_entities(const SyntheticSpec& spec) {
  if (spec.count == 0) throw ConfigError("generate: count must be >= 1");
  if (spec.miss_rate < 0.0 || spec.miss_rate >= 1.0) {
    throw ConfigError("generate: miss_rate must be in [0,1)");
  }
  std::mt19937_64 rng(spec.seed);

  // Cumulative Zipf-like weights for keyed mode.
  std::vector<double> cumulative;
  if (spec.explicit_sizes.empty()) {
    double total = 0.0;
    for (std::uint32_t k = 0; k < spec.key_count; ++k) {
      total += 1.0 / std::pow(static_cast<double>(k + 1), spec.zipf_skew);
      cumulative.push_back(total);
    }
    for (auto& c : cumulative) c /= total;
  } else {
    std::uint64_t total = 0;
    for (auto s : spec.explicit_sizes) total += s;
    if (total > spec.count) {
      throw ConfigError("generate: explicit block sizes exceed count");
    }
  }

  auto key_for_position = [&](std::uint64_t i) -> std::optional<std::string> {
    std::uint64_t offset = 0;
    for (std::size_t b = 0; b < spec.explicit_sizes.size(); ++b) {
      offset += spec.explicit_sizes[b];
      if (i < offset) return "B" + std::to_string(b);
    }
    return std::nullopt;  // beyond the listed sizes: misc
  };

  std::vector<Entity> entities;
  entities.reserve(spec.count);
  for (std::uint64_t i = 0; i < spec.count; ++i) {
    Entity e;
    e.id = spec.id_prefix + pad_id(i);
    e.source_id = spec.source_id;

    bool duplicate = i > 0 && unit_real(rng) < spec.duplicate_rate;
    if (duplicate) {
      const Entity& base = entities[below(rng, i)];
      e.attributes = base.attributes;
      perturb(rng, e.attributes["title"]);
      if (unit_real(rng) < 0.5) perturb(rng, e.attributes["description"]);
    } else {
      e.attributes["title"] = make_title(rng);
      e.attributes["description"] = make_description(rng);
      e.attributes["manufacturer"] = pick(rng, kBrands);
    }

    if (!spec.explicit_sizes.empty()) {
      auto key = key_for_position(i);
      if (key) {
        e.attributes["type"] = *key;
      } else {
        e.attributes.erase("type");
      }
    } else if (unit_real(rng) < spec.miss_rate) {
      e.attributes.erase("type");
    } else if (!duplicate || !e.attributes.contains("type")) {
      double u = unit_real(rng);
      std::size_t k = 0;
      while (k + 1 < cumulative.size() && u > cumulative[k]) ++k;
      e.attributes["type"] = "K" + std::to_string(k);
    }
    entities.push_back(std::move(e));
  }
  return entities;
}

void write_entities_csv(std::ostream& out, std::span<const Entity> entities) {
  const std::vector<std::string> columns = {"id", "title", "description",
                                            "manufacturer", "type"};
  write_csv_row(out, columns);
  for (const auto& e : entities) {
    std::vector<std::string> row;
    row.push_back(e.id);
    for (std::size_t c = 1; c < columns.size(); ++c) {
      const std::string* value = e.attribute(columns[c]);
      row.push_back(value ? *value : "");
    }
    write_csv_row(out, row);
  }
}

}  // namespace parmatch
