#include "parmatch/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>

#include "parmatch/error.hpp"

namespace parmatch {
namespace {

// Sentinel gram character outside the Unicode scalar range.
constexpr char32_t kPad = 0x110000;

bool is_ascii_alnum(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z');
}

char to_ascii_lower(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a')
                                : static_cast<char>(c);
}

std::uint64_t pack_gram(char32_t a, char32_t b, char32_t c) {
  // Scalar values and the pad sentinel all fit in 21 bits.
  return (static_cast<std::uint64_t>(a) << 42) |
         (static_cast<std::uint64_t>(b) << 21) | static_cast<std::uint64_t>(c);
}

std::vector<std::uint64_t> trigram_set(const std::u32string& s) {
  std::u32string padded;
  padded.reserve(s.size() + 4);
  padded.append(2, kPad);
  padded.append(s);
  padded.append(2, kPad);
  std::vector<std::uint64_t> grams;
  grams.reserve(padded.size() - 2);
  for (std::size_t i = 0; i + 2 < padded.size(); ++i) {
    grams.push_back(pack_gram(padded[i], padded[i + 1], padded[i + 2]));
  }
  std::sort(grams.begin(), grams.end());
  grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
  return grams;
}

std::size_t sorted_intersection_size(const std::vector<std::uint64_t>& a,
                                     const std::vector<std::uint64_t>& b) {
  std::size_t count = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia == *ib) {
      ++count;
      ++ia;
      ++ib;
    } else if (*ia < *ib) {
      ++ia;
    } else {
      ++ib;
    }
  }
  return count;
}

}  // namespace

const char* to_string(MeasureKind kind) {
  switch (kind) {
    case MeasureKind::EditDistance: return "editDistance";
    case MeasureKind::Trigram: return "trigram";
    case MeasureKind::JaccardToken: return "jaccardToken";
    case MeasureKind::CosineToken: return "cosineToken";
  }
  return "?";
}

MeasureKind parse_measure_kind(std::string_view name) {
  if (name == "editDistance") return MeasureKind::EditDistance;
  if (name == "trigram") return MeasureKind::Trigram;
  if (name == "jaccardToken") return MeasureKind::JaccardToken;
  if (name == "cosineToken") return MeasureKind::CosineToken;
  throw ConfigError("unknown similarity measure: " + std::string(name));
}

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    unsigned char c0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (c0 < 0x80) {
      len = 1;
      cp = c0;
    } else if ((c0 & 0xE0) == 0xC0) {
      len = 2;
      cp = c0 & 0x1F;
    } else if ((c0 & 0xF0) == 0xE0) {
      len = 3;
      cp = c0 & 0x0F;
    } else if ((c0 & 0xF8) == 0xF0) {
      len = 4;
      cp = c0 & 0x07;
    }
    bool valid = len > 0 && i + len <= s.size();
    if (valid) {
      for (std::size_t k = 1; k < len; ++k) {
        unsigned char ck = static_cast<unsigned char>(s[i + k]);
        if ((ck & 0xC0) != 0x80) {
          valid = false;
          break;
        }
        cp = (cp << 6) | (ck & 0x3F);
      }
    }
    if (valid && len > 1) {
      // Reject overlong encodings and surrogate/out-of-range values.
      constexpr char32_t kMin[5] = {0, 0, 0x80, 0x800, 0x10000};
      if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
        valid = false;
      }
    }
    if (valid) {
      out.push_back(cp);
      i += len;
    } else {
      out.push_back(c0);  // pass the raw byte through
      ++i;
    }
  }
  return out;
}

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  if (b.empty()) return a.size();
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<std::string> tokenize(std::string_view s) {
  // Bytes >= 0x80 (any part of a multi-byte sequence) count as word
  // characters, so classification never splits a UTF-8 sequence.
  std::vector<std::string> tokens;
  std::string current;
  for (char raw : s) {
    unsigned char c = static_cast<unsigned char>(raw);
    if (is_ascii_alnum(c) || c >= 0x80) {
      current.push_back(to_ascii_lower(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

double edit_distance_sim(std::string_view a, std::string_view b) {
  std::u32string ua = decode_utf8(a);
  std::u32string ub = decode_utf8(b);
  std::size_t longest = std::max(ua.size(), ub.size());
  if (longest == 0) return 1.0;
  std::size_t dist = levenshtein(ua, ub);
  return 1.0 - static_cast<double>(dist) / static_cast<double>(longest);
}

double trigram_sim(std::string_view a, std::string_view b) {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  auto ga = trigram_set(decode_utf8(a));
  auto gb = trigram_set(decode_utf8(b));
  std::size_t inter = sorted_intersection_size(ga, gb);
  std::size_t uni = ga.size() + gb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double jaccard_token_sim(std::string_view a, std::string_view b) {
  auto ta = tokenize(a);
  auto tb = tokenize(b);
  std::sort(ta.begin(), ta.end());
  ta.erase(std::unique(ta.begin(), ta.end()), ta.end());
  std::sort(tb.begin(), tb.end());
  tb.erase(std::unique(tb.begin(), tb.end()), tb.end());
  if (ta.empty() && tb.empty()) return 1.0;
  if (ta.empty() || tb.empty()) return 0.0;
  std::size_t inter = 0;
  auto ia = ta.begin();
  auto ib = tb.begin();
  while (ia != ta.end() && ib != tb.end()) {
    if (*ia == *ib) {
      ++inter;
      ++ia;
      ++ib;
    } else if (*ia < *ib) {
      ++ia;
    } else {
      ++ib;
    }
  }
  std::size_t uni = ta.size() + tb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double cosine_token_sim(std::string_view a, std::string_view b) {
  auto ta = tokenize(a);
  auto tb = tokenize(b);
  if (ta.empty() && tb.empty()) return 1.0;
  if (ta.empty() || tb.empty()) return 0.0;
  std::map<std::string, double> fa;
  std::map<std::string, double> fb;
  for (auto& t : ta) fa[t] += 1.0;
  for (auto& t : tb) fb[t] += 1.0;
  double dot = 0.0;
  for (const auto& [token, count] : fa) {
    auto it = fb.find(token);
    if (it != fb.end()) dot += count * it->second;
  }
  double na = 0.0;
  double nb = 0.0;
  for (const auto& [token, count] : fa) na += count * count;
  for (const auto& [token, count] : fb) nb += count * count;
  // sqrt(na*nb) keeps sim(a,a) at exactly 1: counts are integers, so
  // na*nb is a perfect square computed exactly in double.
  return dot / std::sqrt(na * nb);
}

double apply_measure(const SimilarityMeasure& measure, const Entity& e1,
                     const Entity& e2) {
  const std::string* v1 = e1.attribute(measure.attribute);
  const std::string* v2 = e2.attribute(measure.attribute);
  if (v1 == nullptr || v2 == nullptr) return 0.0;
  switch (measure.kind) {
    case MeasureKind::EditDistance: return edit_distance_sim(*v1, *v2);
    case MeasureKind::Trigram: return trigram_sim(*v1, *v2);
    case MeasureKind::JaccardToken: return jaccard_token_sim(*v1, *v2);
    case MeasureKind::CosineToken: return cosine_token_sim(*v1, *v2);
  }
  return 0.0;
}

}  // namespace parmatch
