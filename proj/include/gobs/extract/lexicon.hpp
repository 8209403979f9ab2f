#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include "gobs/core/error.hpp"
#include "gobs/extract/segment.hpp"

namespace gobs {

// Built-in copies of data/lexicon.tsv and data/descriptive.txt.
inline constexpr std::string_view kDefaultLexiconTsv = R"lex(
# token<TAB>valence in [-1, 1]
amazing	0.7
awesome	0.8
awful	-0.75
bad	-0.6
beautiful	0.7
best	0.8
better	0.5
bored	-0.35
boring	-0.4
bright	0.4
calm	0.35
cheerful	0.6
comfortable	0.4
cool	0.3
cozy	0.45
cute	0.5
delighted	0.7
delightful	0.7
depressed	-0.7
disappointed	-0.55
disappointing	-0.55
dislike	-0.4
enjoy	0.55
enjoyed	0.55
enjoying	0.55
excellent	0.8
excited	0.6
exciting	0.6
fantastic	0.75
fine	0.2
fortunate	0.5
frustrated	-0.5
fun	0.55
funny	0.45
glad	0.5
good	0.475
gorgeous	0.7
great	0.775
happy	0.675
hate	-0.675
horrible	-0.625
hurt	-0.5
interesting	0.425
joy	0.7
kind	0.45
like	0.375
liked	0.375
love	0.8
loved	0.7
lovely	0.7
lucky	0.45
mad	-0.55
miserable	-0.75
nice	0.45
no	-0.3
not	-0.25
pleasant	0.55
pleased	0.5
poor	-0.5
relaxed	0.45
relaxing	0.45
sad	-0.525
scared	-0.5
sorry	-0.15
stressed	-0.45
stressful	-0.45
sunny	0.3
sweet	0.5
terrible	-0.75
thank	0.375
thanks	0.475
tired	-0.3
ugly	-0.6
unfortunately	-0.45
upset	-0.5
warm	0.3
welcome	0.5
wonderful	0.675
worried	-0.4
worse	-0.6
worst	-0.775
wow	0.5
yay	0.6
yes	0.4
)lex";

inline constexpr std::string_view kDefaultDescriptiveWords = R"lex(
# adjectives and adverbs counted as descriptive detail
absolutely
ancient
aromatic
beautiful
breathtaking
brilliant
bustling
carefully
charming
colorful
crisp
delicious
detailed
elaborate
elegant
enormous
exquisite
extensive
extremely
fascinating
gigantic
glorious
gorgeous
historic
immense
incredibly
intricate
lush
magnificent
majestic
meticulously
mysterious
picturesque
precisely
quaint
remarkable
remarkably
scenic
serene
sophisticated
spectacular
stunning
thoroughly
tremendous
unique
vast
vibrant
vividly
whimsical
)lex";

namespace detail {

template <typename Fn>
void for_each_data_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto trimmed = trim(line);
    if (!trimmed.empty() && trimmed.front() != '#') fn(line_no, line);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(0, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

// Token -> valence in [-1, 1]. Lookup is case-insensitive.
class SentimentLexicon {
 public:
  SentimentLexicon() = default;

  void set(std::string_view token, double valence) {
    if (!(valence >= -1.0 && valence <= 1.0))
      throw DataError(0, "valence for '" + std::string(token) + "' outside [-1, 1]");
    entries_[lowercase(token)] = valence;
  }

  const double* find(std::string_view token) const {
    auto it = entries_.find(lowercase(token));
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::size_t size() const noexcept { return entries_.size(); }
  const std::unordered_map<std::string, double>& entries() const noexcept { return entries_; }

  // One "token<TAB>valence" per line; '#' starts a comment line.
  static SentimentLexicon parse(std::string_view text) {
    SentimentLexicon lex;
    detail::for_each_data_line(text, [&](std::size_t no, std::string_view line) {
      auto tab = line.find('\t');
      if (tab == std::string_view::npos) throw DataError(no, "expected token<TAB>valence");
      auto token = detail::trim(line.substr(0, tab));
      auto value = detail::trim(line.substr(tab + 1));
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (token.empty() || ec != std::errc() || ptr != value.data() + value.size())
        throw DataError(no, "malformed lexicon entry");
      if (!(v >= -1.0 && v <= 1.0)) throw DataError(no, "valence outside [-1, 1]");
      lex.entries_[lowercase(token)] = v;
    });
    return lex;
  }

  static SentimentLexicon load(const std::string& path) { return parse(detail::read_file(path)); }

  static const SentimentLexicon& builtin() {
    static const SentimentLexicon lex = parse(kDefaultLexiconTsv);
    return lex;
  }

 private:
  std::unordered_map<std::string, double> entries_;
};

// Case-insensitive word set, one word per line.
class WordList {
 public:
  WordList() = default;
  WordList(std::initializer_list<std::string_view> ws) {
    for (auto w : ws) words_.insert(lowercase(w));
  }

  bool contains(std::string_view w) const { return words_.count(lowercase(w)) != 0; }
  std::size_t size() const noexcept { return words_.size(); }

  static WordList parse(std::string_view text) {
    WordList wl;
    detail::for_each_data_line(text, [&](std::size_t, std::string_view line) {
      wl.words_.insert(lowercase(detail::trim(line)));
    });
    return wl;
  }

  static WordList load(const std::string& path) { return parse(detail::read_file(path)); }

  static const WordList& builtin_descriptive() {
    static const WordList wl = parse(kDefaultDescriptiveWords);
    return wl;
  }

 private:
  std::unordered_set<std::string> words_;
};

// Mean valence of lexicon-matched tokens; 0 when nothing matches.
inline double sentiment_score(std::string_view sentence, const SentimentLexicon& lexicon) {
  double sum = 0.0;
  std::size_t matched = 0;
  for (const auto& tok : tokenize(sentence)) {
    if (const double* v = lexicon.find(tok)) {
      sum += *v;
      ++matched;
    }
  }
  if (matched == 0) return 0.0;
  return std::clamp(sum / static_cast<double>(matched), -1.0, 1.0);
}

}  // namespace gobs
