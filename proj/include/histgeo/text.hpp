#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace histgeo {

/// Word-boundary abbreviation expansions applied by normalize().
///
/// Keys are matched against whole lower-case tokens, first with their dots
/// and then with dots removed, so "bd" also covers "bd.".
class AbbreviationTable {
public:
  AbbreviationTable() = default;

  /// French street-type defaults (r. -> rue, bd -> boulevard, ...).
  static const AbbreviationTable& defaults();

  /// One "abbrev=expansion" per line; blank lines and '#' comments ignored.
  static AbbreviationTable parse(std::string_view text);
  static AbbreviationTable load(const std::filesystem::path& path);

  void set(std::string abbreviation, std::string expansion);
  const std::string* find(std::string_view token) const;
  std::size_t size() const { return entries_.size(); }

private:
  std::map<std::string, std::string, std::less<>> entries_;
};

struct NormalizedAddress {
  std::string normalized;
  std::optional<std::int64_t> building_number;
};

/// Lowercase, fold accents to ASCII, split apostrophes, expand abbreviations,
/// drop punctuation other than hyphens and collapse whitespace. The building
/// number is the leading digit run of the first token, if any. Idempotent.
NormalizedAddress normalize(std::string_view raw, const AbbreviationTable& table = AbbreviationTable::defaults());

/// Leading digit run of the first token of an already normalized string.
std::optional<std::int64_t> leading_number(std::string_view normalized);

/// Three bytes packed big-endian into the low 24 bits.
using Trigram = std::uint32_t;

std::string to_string(Trigram t);

/// Sorted, duplicate-free trigrams. Each alphanumeric word is lowercased and
/// padded with two leading spaces and one trailing space before windowing.
std::vector<Trigram> trigram_set(std::string_view s);

/// 1 - shared / (size_a + size_b - shared), with both-empty -> 0 and
/// exactly-one-empty -> 1. Every trigram distance in the library goes
/// through this so index filtering and scoring agree bit for bit.
double trigram_distance_from_counts(std::size_t shared, std::size_t size_a, std::size_t size_b);

double trigram_distance(std::span<const Trigram> a, std::span<const Trigram> b);

/// Jaccard distance between trigram sets, in [0, 1].
double string_distance(std::string_view s1, std::string_view s2);

/// Parity penalty added when the two numbers sit on opposite street sides.
inline constexpr double kParityPenalty = 10.0;

/// |b_d - b_i|, plus kParityPenalty when parities differ.
double building_number_distance(std::int64_t query_number, std::int64_t candidate_number);

}  // namespace histgeo
