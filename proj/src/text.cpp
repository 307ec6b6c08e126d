#include "histgeo/text.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace histgeo {

const AbbreviationTable& AbbreviationTable::defaults() {
  static const AbbreviationTable table = [] {
    AbbreviationTable t;
    t.set("r.", "rue");
    t.set("bd", "boulevard");
    t.set("boul.", "boulevard");
    t.set("av.", "avenue");
    t.set("pl.", "place");
    t.set("st", "saint");
    t.set("ste", "sainte");
    t.set("fg", "faubourg");
    t.set("faub.", "faubourg");
    return t;
  }();
  return table;
}

AbbreviationTable AbbreviationTable::parse(std::string_view text) {
  AbbreviationTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return std::string();
    return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("abbreviation line " + std::to_string(line_no) + ": expected abbrev=expansion");
    }
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw std::invalid_argument("abbreviation line " + std::to_string(line_no) + ": empty abbreviation or expansion");
    }
    table.set(std::move(key), std::move(value));
  }
  return table;
}

AbbreviationTable AbbreviationTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read abbreviation file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void AbbreviationTable::set(std::string abbreviation, std::string expansion) {
  const auto lower = [](std::string& s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  };
  lower(abbreviation);
  lower(expansion);
  entries_[std::move(abbreviation)] = std::move(expansion);
}

const std::string* AbbreviationTable::find(std::string_view token) const {
  const auto it = entries_.find(token);
  return it == entries_.end() ? nullptr : &it->second;
}

namespace {

// ASCII replacements for U+00C0..U+017F; empty means "not a letter we fold".
const char* fold_latin(char32_t cp) {
  static const char* const latin1[64] = {
      "a", "a", "a", "a", "a", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i", "i",   // C0-CF
      "d", "n", "o", "o", "o", "o", "o", "",  "o", "u", "u", "u", "u", "y", "th", "ss",  // D0-DF
      "a", "a", "a", "a", "a", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i", "i",   // E0-EF
      "d", "n", "o", "o", "o", "o", "o", "",  "o", "u", "u", "u", "u", "y", "th", "y",   // F0-FF
  };
  struct Run {
    char32_t first;
    char32_t last;
    const char* ascii;
  };
  static const Run extended[] = {
      {0x100, 0x105, "a"}, {0x106, 0x10D, "c"}, {0x10E, 0x111, "d"}, {0x112, 0x11B, "e"}, {0x11C, 0x123, "g"},
      {0x124, 0x127, "h"}, {0x128, 0x131, "i"}, {0x132, 0x133, "ij"}, {0x134, 0x135, "j"}, {0x136, 0x138, "k"},
      {0x139, 0x142, "l"}, {0x143, 0x14B, "n"}, {0x14C, 0x151, "o"}, {0x152, 0x153, "oe"}, {0x154, 0x159, "r"},
      {0x15A, 0x161, "s"}, {0x162, 0x167, "t"}, {0x168, 0x173, "u"}, {0x174, 0x175, "w"}, {0x176, 0x178, "y"},
      {0x179, 0x17E, "z"}, {0x17F, 0x17F, "s"},
  };
  if (cp >= 0xC0 && cp <= 0xFF) return latin1[cp - 0xC0];
  for (const auto& run : extended) {
    if (cp >= run.first && cp <= run.last) return run.ascii;
  }
  return "";
}

bool is_apostrophe(char32_t cp) { return cp == U'\'' || cp == 0x2018 || cp == 0x2019 || cp == 0x02BC || cp == 0x00B4; }

// Decodes one UTF-8 sequence at `i`; malformed bytes decode as U+FFFD.
char32_t next_codepoint(std::string_view s, std::size_t& i) {
  const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
  const unsigned char b0 = byte(i);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int extra = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    extra = 1;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    extra = 2;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    extra = 3;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  if (i + extra >= s.size()) {
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k <= extra; ++k) {
    if ((byte(i + k) & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (byte(i + k) & 0x3F);
  }
  i += extra + 1;
  return cp;
}

// Lower-case ASCII with accents folded; apostrophes and unknown code points
// become spaces.
std::string fold(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  std::size_t i = 0;
  while (i < raw.size()) {
    const char32_t cp = next_codepoint(raw, i);
    if (cp < 0x80) {
      if (is_apostrophe(cp)) {
        out.push_back(' ');
      } else {
        out.push_back(static_cast<char>(std::tolower(static_cast<int>(cp))));
      }
      continue;
    }
    if (is_apostrophe(cp)) {
      out.push_back(' ');
      continue;
    }
    const char* ascii = fold_latin(cp);
    if (*ascii == '\0') {
      out.push_back(' ');
    } else {
      out += ascii;
    }
  }
  return out;
}

bool is_ascii_alnum(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); }

}  // namespace

std::optional<std::int64_t> leading_number(std::string_view normalized) {
  std::size_t end = 0;
  while (end < normalized.size() && normalized[end] >= '0' && normalized[end] <= '9') ++end;
  if (end == 0 || end > 18) return std::nullopt;
  std::int64_t value = 0;
  std::from_chars(normalized.data(), normalized.data() + end, value);
  return value;
}

NormalizedAddress normalize(std::string_view raw, const AbbreviationTable& table) {
  const std::string folded = fold(raw);
  std::string out;
  std::size_t pos = 0;
  while (pos < folded.size()) {
    const auto start = folded.find_first_not_of(" \t\r\n\f\v", pos);
    if (start == std::string::npos) break;
    auto stop = folded.find_first_of(" \t\r\n\f\v", start);
    if (stop == std::string::npos) stop = folded.size();
    pos = stop;

    std::string token;
    for (std::size_t k = start; k < stop; ++k) {
      const char c = folded[k];
      if (is_ascii_alnum(c) || c == '-' || c == '.') token.push_back(c);
    }
    const std::string* expansion = table.find(token);
    std::string dotless;
    std::remove_copy(token.begin(), token.end(), std::back_inserter(dotless), '.');
    if (expansion == nullptr) expansion = table.find(dotless);
    const std::string& word = expansion != nullptr ? *expansion : dotless;
    if (word.empty()) continue;
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  NormalizedAddress result;
  result.building_number = leading_number(out);
  result.normalized = std::move(out);
  return result;
}

std::string to_string(Trigram t) {
  return std::string{static_cast<char>((t >> 16) & 0xFF), static_cast<char>((t >> 8) & 0xFF),
                     static_cast<char>(t & 0xFF)};
}

std::vector<Trigram> trigram_set(std::string_view s) {
  std::vector<Trigram> out;
  auto is_word = [](unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; };
  std::size_t i = 0;
  std::string padded;
  while (i < s.size()) {
    while (i < s.size() && !is_word(static_cast<unsigned char>(s[i]))) ++i;
    if (i >= s.size()) break;
    padded.assign("  ");
    while (i < s.size() && is_word(static_cast<unsigned char>(s[i]))) {
      padded.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(s[i]))));
      ++i;
    }
    padded.push_back(' ');
    for (std::size_t k = 0; k + 3 <= padded.size(); ++k) {
      out.push_back((static_cast<Trigram>(static_cast<unsigned char>(padded[k])) << 16) |
                    (static_cast<Trigram>(static_cast<unsigned char>(padded[k + 1])) << 8) |
                    static_cast<Trigram>(static_cast<unsigned char>(padded[k + 2])));
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double trigram_distance_from_counts(std::size_t shared, std::size_t size_a, std::size_t size_b) {
  if (size_a == 0 && size_b == 0) return 0.0;
  if (size_a == 0 || size_b == 0) return 1.0;
  const std::size_t united = size_a + size_b - shared;
  return 1.0 - static_cast<double>(shared) / static_cast<double>(united);
}

double trigram_distance(std::span<const Trigram> a, std::span<const Trigram> b) {
  std::size_t shared = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++shared;
      ++ia;
      ++ib;
    }
  }
  return trigram_distance_from_counts(shared, a.size(), b.size());
}

double string_distance(std::string_view s1, std::string_view s2) {
  const auto t1 = trigram_set(s1);
  const auto t2 = trigram_set(s2);
  return trigram_distance(t1, t2);
}

double building_number_distance(std::int64_t query_number, std::int64_t candidate_number) {
  const std::int64_t diff = candidate_number > query_number ? candidate_number - query_number : query_number - candidate_number;
  const bool same_parity = (query_number % 2 == 0) == (candidate_number % 2 == 0);
  const double base = static_cast<double>(diff);
  return same_parity ? base : std::abs(base + kParityPenalty);
}

}  // namespace histgeo
