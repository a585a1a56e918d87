#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "parmatch/model.hpp"

namespace parmatch {

enum class MeasureKind { EditDistance, Trigram, JaccardToken, CosineToken };

const char* to_string(MeasureKind kind);
MeasureKind parse_measure_kind(std::string_view name);  // throws ConfigError

// One attribute-level matcher: a similarity function bound to the
// attribute it reads.
struct SimilarityMeasure {
  MeasureKind kind = MeasureKind::EditDistance;
  std::string attribute;
};

// Decodes UTF-8 into Unicode scalar values. Bytes that do not form a valid
// sequence are passed through one by one, so decoding is total and
// deterministic on arbitrary input.
std::u32string decode_utf8(std::string_view s);

// Levenshtein distance over Unicode scalar values.
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);

// ASCII-lowercased tokens, split on runs of characters that are neither
// ASCII alphanumeric nor part of a multi-byte sequence. Deterministic and
// locale-independent.
std::vector<std::string> tokenize(std::string_view s);

// 1 - lev(a,b) / max(|a|,|b|); 1 when both strings are empty.
double edit_distance_sim(std::string_view a, std::string_view b);

// Jaccard coefficient over the character 3-gram sets of both strings,
// padded with two boundary sentinels on each side. Both empty -> 1,
// exactly one empty -> 0.
double trigram_sim(std::string_view a, std::string_view b);

// Jaccard coefficient over token sets. Both token sets empty -> 1,
// exactly one empty -> 0.
double jaccard_token_sim(std::string_view a, std::string_view b);

// Cosine of the term-frequency vectors over tokens. Zero vector on one
// side -> 0, on both sides -> 1.
double cosine_token_sim(std::string_view a, std::string_view b);

// Reads the measure's attribute from both entities and delegates to the
// kind's function. An absent value on either side yields similarity 0.
double apply_measure(const SimilarityMeasure& measure, const Entity& e1,
                     const Entity& e2);

}  // namespace parmatch
