#pragma once

// Character token sets and text normalization. Raw UTF-8 text is lowered,
// stripped of punctuation (apostrophe and hyphen survive as ordinary
// tokens), transliterated to the token set via a built-in decomposition
// table, and split on whitespace. Characters that still fail to map are
// discarded, so normalization is total.

#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "clpl/common.hpp"
#include "clpl/io.hpp"

namespace clpl {

// ---------------------------------------------------------------------------
// Minimal UTF-8 codec. Invalid byte sequences are skipped.

inline std::vector<char32_t> utf8_decode(std::string_view s) {
  std::vector<char32_t> out;
  size_t i = 0;
  while (i < s.size()) {
    unsigned char c = s[i];
    char32_t cp = 0;
    int extra = 0;
    if (c < 0x80) {
      cp = c;
    } else if ((c >> 5) == 0x6) {
      cp = c & 0x1f;
      extra = 1;
    } else if ((c >> 4) == 0xe) {
      cp = c & 0x0f;
      extra = 2;
    } else if ((c >> 3) == 0x1e) {
      cp = c & 0x07;
      extra = 3;
    } else {
      ++i;
      continue;
    }
    if (i + extra >= s.size()) break;
    bool ok = true;
    for (int k = 1; k <= extra; ++k) {
      unsigned char cc = s[i + k];
      if ((cc >> 6) != 0x2) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cc & 0x3f);
    }
    i += ok ? size_t(extra) + 1 : 1;
    if (ok) out.push_back(cp);
  }
  return out;
}

inline void utf8_append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(char(cp));
  } else if (cp < 0x800) {
    out.push_back(char(0xc0 | (cp >> 6)));
    out.push_back(char(0x80 | (cp & 0x3f)));
  } else if (cp < 0x10000) {
    out.push_back(char(0xe0 | (cp >> 12)));
    out.push_back(char(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(char(0x80 | (cp & 0x3f)));
  } else {
    out.push_back(char(0xf0 | (cp >> 18)));
    out.push_back(char(0x80 | ((cp >> 12) & 0x3f)));
    out.push_back(char(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(char(0x80 | (cp & 0x3f)));
  }
}

inline std::string utf8_encode(char32_t cp) {
  std::string s;
  utf8_append(s, cp);
  return s;
}

// ---------------------------------------------------------------------------
// TokenSet

struct TokenSet {
  std::vector<char32_t> tokens;  // character tokens, dense ids 0..N-1
  int blank_id = -1;
  int wb_id = -1;
  std::unordered_map<char32_t, int> char_to_id;

  int n_tokens() const { return int(tokens.size()) + 2; }
  int n_chars() const { return int(tokens.size()); }
  bool is_char(int id) const { return id >= 0 && id < n_chars(); }

  int char_id(char32_t cp) const {
    auto it = char_to_id.find(cp);
    return it == char_to_id.end() ? -1 : it->second;
  }
  char32_t char_at(int id) const {
    require(is_char(id), "TokenSet: not a character token id");
    return tokens[size_t(id)];
  }
};

inline TokenSet make_tokenset(const std::vector<char32_t>& chars) {
  TokenSet ts;
  ts.tokens = chars;
  for (size_t i = 0; i < chars.size(); ++i) {
    require(ts.char_to_id.emplace(chars[i], int(i)).second, "TokenSet: duplicate character");
  }
  ts.blank_id = int(chars.size());
  ts.wb_id = int(chars.size()) + 1;
  return ts;
}

// Lowercase ASCII letters plus apostrophe and hyphen.
inline TokenSet latin_tokenset() {
  std::vector<char32_t> chars;
  for (char32_t c = U'a'; c <= U'z'; ++c) chars.push_back(c);
  chars.push_back(U'\'');
  chars.push_back(U'-');
  return make_tokenset(chars);
}

// Union of the en/de/es/fr/rw lowercase alphabets plus apostrophe and
// hyphen: 53 character tokens, 54 counting the word boundary.
inline TokenSet cv54_tokenset() {
  std::vector<char32_t> chars;
  for (char32_t c = U'a'; c <= U'z'; ++c) chars.push_back(c);
  chars.push_back(U'\'');
  chars.push_back(U'-');
  const char32_t accented[] = {U'à', U'á', U'â', U'ä', U'æ', U'ç', U'è', U'é', U'ê',
                               U'ë', U'í', U'î', U'ï', U'ñ', U'ó', U'ô', U'ö', U'ù',
                               U'ú', U'û', U'ü', U'ý', U'ÿ', U'œ', U'ß'};
  for (char32_t c : accented) chars.push_back(c);
  return make_tokenset(chars);
}

// First n lowercase letters; used by the synthetic languages.
inline TokenSet alphabet_tokenset(int n) {
  require(n >= 1 && n <= 26, "alphabet_tokenset: n in [1,26]");
  std::vector<char32_t> chars;
  for (int i = 0; i < n; ++i) chars.push_back(char32_t(U'a' + i));
  return make_tokenset(chars);
}

// Serialization: one token per line, `#blank` / `#wb` mark the specials.
inline std::string tokenset_to_string(const TokenSet& ts) {
  std::string out;
  int n = ts.n_tokens();
  for (int id = 0; id < n; ++id) {
    if (id == ts.blank_id) {
      out += "#blank\n";
    } else if (id == ts.wb_id) {
      out += "#wb\n";
    } else {
      out += utf8_encode(ts.char_at(id));
      out += "\n";
    }
  }
  return out;
}

inline void save_tokenset(const TokenSet& ts, const std::string& path) {
  write_text_file(path, tokenset_to_string(ts));
}

inline TokenSet parse_tokenset(const std::vector<std::string>& lines) {
  TokenSet ts;
  int blank = -1, wb = -1;
  std::vector<char32_t> chars;
  int id = 0;
  for (size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty()) continue;
    if (line == "#blank") {
      if (blank >= 0) throw ParseError("duplicate #blank", int(i) + 1);
      blank = id++;
    } else if (line == "#wb") {
      if (wb >= 0) throw ParseError("duplicate #wb", int(i) + 1);
      wb = id++;
    } else {
      auto cps = utf8_decode(line);
      if (cps.size() != 1) throw ParseError("token line must hold one character", int(i) + 1);
      chars.push_back(cps[0]);
      ++id;
    }
  }
  if (blank < 0 || wb < 0) throw ParseError("token set needs #blank and #wb lines", int(lines.size()));
  // Canonical layout: character tokens first, the two specials last.
  if (!(blank >= int(chars.size()) && wb >= int(chars.size()))) {
    throw ParseError("#blank and #wb must follow the character tokens", 1);
  }
  TokenSet out = make_tokenset(chars);
  if (blank > wb) {  // allow either order of the two trailing specials
    out.wb_id = int(chars.size());
    out.blank_id = int(chars.size()) + 1;
  }
  return out;
}

inline TokenSet load_tokenset(const std::string& path) {
  return parse_tokenset(read_lines(path));
}

// ---------------------------------------------------------------------------
// NormalizedText

struct NormalizedText {
  std::vector<std::vector<int>> words;  // token ids per word, never empty words

  bool empty() const { return words.empty(); }
  bool operator==(const NormalizedText& o) const { return words == o.words; }
};

namespace detail {

inline char32_t lower_cp(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 32;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;  // Latin-1 capitals
  if (c >= 0x100 && c < 0x178) {                           // Latin Extended-A pairs
    if (c % 2 == 0) return c + 1;
    return c;
  }
  if (c == 0x178) return 0xFF;  // capital y-diaeresis
  if (c >= 0x179 && c <= 0x17E) return (c % 2 == 1) ? c + 1 : c;
  if (c >= 0x391 && c <= 0x3A9) return c + 32;  // Greek capitals
  if (c >= 0x410 && c <= 0x42F) return c + 32;  // Cyrillic capitals
  return c;
}

inline bool is_space_cp(char32_t c) {
  switch (c) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

inline bool is_digit_cp(char32_t c) { return c >= U'0' && c <= U'9'; }

// Punctuation (Unicode P*-style subset); apostrophe and hyphen variants are
// deliberately absent so they reach the transliteration step.
inline bool is_punct_cp(char32_t c) {
  if (c < 0x80) {
    static const std::string ascii = "!\"#$%&()*+,./:;<=>?@[\\]^_`{|}~";
    return c != U'\'' && c != U'-' && ascii.find(char(c)) != std::string::npos;
  }
  switch (c) {
    case 0xA1: case 0xA6: case 0xA7: case 0xAB: case 0xB6: case 0xB7:
    case 0xBB: case 0xBF:
      return true;
    case 0x2010: case 0x2011: case 0x2019:
      return false;  // hyphen/apostrophe variants, transliterated instead
    default:
      break;
  }
  if (c >= 0x2012 && c <= 0x2027) return true;   // dashes, quotes, daggers, ellipsis
  if (c >= 0x2030 && c <= 0x205E) return true;   // permille, primes, guillemets
  if (c >= 0x3001 && c <= 0x3011) return true;   // CJK punctuation
  if (c == 0xFF01 || c == 0xFF0C || c == 0xFF1F || c == 0xFF1B || c == 0xFF1A) return true;
  return false;
}

// Built-in decomposition table: Latin-1 Supplement and Latin Extended-A
// letters to ASCII, plus the apostrophe/hyphen variants and the Hausa
// hooked letters. Keys are lowercase (lower_cp runs first).
inline const std::unordered_map<char32_t, const char*>& translit_table() {
  static const std::unordered_map<char32_t, const char*> t = {
      {U'à', "a"},  {U'á', "a"},  {U'â', "a"},  {U'ã', "a"},  {U'ä', "a"},
      {U'å', "a"},  {U'æ', "ae"}, {U'ç', "c"},  {U'è', "e"},  {U'é', "e"},
      {U'ê', "e"},  {U'ë', "e"},  {U'ì', "i"},  {U'í', "i"},  {U'î', "i"},
      {U'ï', "i"},  {U'ð', "d"},  {U'ñ', "n"},  {U'ò', "o"},  {U'ó', "o"},
      {U'ô', "o"},  {U'õ', "o"},  {U'ö', "o"},  {U'ø', "o"},  {U'ù', "u"},
      {U'ú', "u"},  {U'û', "u"},  {U'ü', "u"},  {U'ý', "y"},  {U'þ', "th"},
      {U'ÿ', "y"},  {U'ß', "ss"},
      {0x101, "a"}, {0x103, "a"}, {0x105, "a"}, {0x107, "c"}, {0x109, "c"},
      {0x10B, "c"}, {0x10D, "c"}, {0x10F, "d"}, {0x111, "d"}, {0x113, "e"},
      {0x115, "e"}, {0x117, "e"}, {0x119, "e"}, {0x11B, "e"}, {0x11D, "g"},
      {0x11F, "g"}, {0x121, "g"}, {0x123, "g"}, {0x125, "h"}, {0x127, "h"},
      {0x129, "i"}, {0x12B, "i"}, {0x12D, "i"}, {0x12F, "i"}, {0x131, "i"},
      {0x133, "ij"}, {0x135, "j"}, {0x137, "k"}, {0x13A, "l"}, {0x13C, "l"},
      {0x13E, "l"}, {0x140, "l"}, {0x142, "l"}, {0x144, "n"}, {0x146, "n"},
      {0x148, "n"}, {0x14B, "n"}, {0x14D, "o"}, {0x14F, "o"}, {0x151, "o"},
      {0x153, "oe"}, {0x155, "r"}, {0x157, "r"}, {0x159, "r"}, {0x15B, "s"},
      {0x15D, "s"}, {0x15F, "s"}, {0x161, "s"}, {0x163, "t"}, {0x165, "t"},
      {0x167, "t"}, {0x169, "u"}, {0x16B, "u"}, {0x16D, "u"}, {0x16F, "u"},
      {0x171, "u"}, {0x173, "u"}, {0x175, "w"}, {0x177, "y"}, {0x17A, "z"},
      {0x17C, "z"}, {0x17E, "z"},
      {0x253, "b"}, {0x257, "d"}, {0x199, "k"}, {0x1B4, "y"},  // Hausa hooks
      {0x2010, "-"}, {0x2011, "-"}, {0x2019, "'"},
  };
  return t;
}

}  // namespace detail

// Lowercase, strip punctuation and digits, transliterate out-of-set
// characters, discard what remains unmappable, split on whitespace.
inline NormalizedText normalize(std::string_view raw, const TokenSet& ts) {
  NormalizedText nt;
  std::vector<int> cur;
  auto flush = [&] {
    if (!cur.empty()) {
      nt.words.push_back(cur);
      cur.clear();
    }
  };
  auto emit_cp = [&](char32_t c) {
    int id = ts.char_id(c);
    if (id >= 0) cur.push_back(id);
  };
  for (char32_t cp : utf8_decode(raw)) {
    char32_t c = detail::lower_cp(cp);
    if (detail::is_space_cp(c)) {
      flush();
      continue;
    }
    if (detail::is_digit_cp(c) || detail::is_punct_cp(c)) continue;
    if (ts.char_id(c) >= 0) {
      cur.push_back(ts.char_id(c));
      continue;
    }
    auto it = detail::translit_table().find(c);
    if (it == detail::translit_table().end()) continue;  // unmappable, discard
    for (char32_t mc : utf8_decode(it->second)) emit_cp(mc);
  }
  flush();
  return nt;
}

inline std::string word_to_string(const std::vector<int>& word, const TokenSet& ts) {
  std::string s;
  for (int id : word) utf8_append(s, ts.char_at(id));
  return s;
}

inline std::string to_string(const NormalizedText& nt, const TokenSet& ts) {
  std::string s;
  for (size_t i = 0; i < nt.words.size(); ++i) {
    if (i) s += ' ';
    s += word_to_string(nt.words[i], ts);
  }
  return s;
}

inline std::vector<std::string> to_words(const NormalizedText& nt, const TokenSet& ts) {
  std::vector<std::string> out;
  out.reserve(nt.words.size());
  for (const auto& w : nt.words) out.push_back(word_to_string(w, ts));
  return out;
}

// Words joined by the word-boundary token. decode() inverts encode().
inline std::vector<int> encode(const NormalizedText& nt, const TokenSet& ts) {
  std::vector<int> out;
  for (size_t i = 0; i < nt.words.size(); ++i) {
    require(!nt.words[i].empty(), "encode: empty word");
    if (i) out.push_back(ts.wb_id);
    for (int id : nt.words[i]) {
      require(ts.is_char(id), "encode: invalid token index " + std::to_string(id));
      out.push_back(id);
    }
  }
  return out;
}

// Lenient conversion for hypothesis token streams: split on word boundaries,
// drop empty segments and non-character ids.
inline std::vector<std::string> words_from_tokens(const std::vector<int>& seq,
                                                  const TokenSet& ts) {
  std::vector<std::string> out;
  std::string cur;
  for (int id : seq) {
    if (id == ts.wb_id) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (ts.is_char(id)) {
      utf8_append(cur, ts.char_at(id));
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline NormalizedText decode(const std::vector<int>& seq, const TokenSet& ts) {
  NormalizedText nt;
  std::vector<int> cur;
  for (int id : seq) {
    if (id == ts.wb_id) {
      require(!cur.empty(), "decode: empty word before boundary");
      nt.words.push_back(cur);
      cur.clear();
    } else {
      require(ts.is_char(id), "decode: invalid token index " + std::to_string(id));
      cur.push_back(id);
    }
  }
  if (!cur.empty()) nt.words.push_back(cur);
  return nt;
}

}  // namespace clpl
