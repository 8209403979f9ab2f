#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "gobs/extract/features.hpp"
#include "gobs/observer/directive.hpp"
#include "oracles.hpp"

using namespace gobs;

namespace {

std::string data_file(const std::string& name) {
  std::ifstream in(std::string(GOBS_DATA_DIR) + "/" + name, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> raw(const EmbeddingVector& v) { return v.values; }

}  // namespace

// --- segmentation ---------------------------------------------------------

TEST(Segment, Empty) {
  auto s = segment("");
  EXPECT_TRUE(s.tokens.empty());
  EXPECT_TRUE(s.sentences.empty());
}

TEST(Segment, HelloThere) {
  auto s = segment("Hello there!");
  EXPECT_EQ(s.tokens, (std::vector<std::string>{"hello", "there"}));
  EXPECT_EQ(s.sentences, (std::vector<std::string>{"Hello there!"}));
}

TEST(Segment, TwoSentences) {
  auto s = segment("Hi. Bye.");
  EXPECT_EQ(s.sentences.size(), 2u);
  EXPECT_EQ(s.tokens, (std::vector<std::string>{"hi", "bye"}));
}

TEST(Segment, ApostrophesAndDecimals) {
  EXPECT_EQ(tokenize("Don’t stop, it's 3.5 o'clock"),
            (std::vector<std::string>{"don't", "stop", "it's", "3", "5", "o'clock"}));
  EXPECT_EQ(split_sentences("Pi is 3.14 today. Yes").size(), 2u);
  EXPECT_EQ(tokenize("' '' hi"), (std::vector<std::string>{"hi"}));
}

TEST(Segment, CountCompletionTokens) {
  EXPECT_EQ(count_completion_tokens(""), 0u);
  EXPECT_EQ(count_completion_tokens("Hello there!"), 2u);
  EXPECT_EQ(count_completion_tokens(oracle::words(60)), 60u);
  Tokenizer chars = [](std::string_view s) { return s.size(); };
  EXPECT_EQ(count_completion_tokens("abc", chars), 3u);
}

// --- sentiment and tone ---------------------------------------------------

TEST(Sentiment, LexiconMean) {
  SentimentLexicon lex;
  lex.set("good", 0.8);
  lex.set("bad", -0.6);
  EXPECT_DOUBLE_EQ(sentiment_score("nothing here", lex), 0.0);
  EXPECT_DOUBLE_EQ(sentiment_score("good good", lex), 0.8);
  EXPECT_NEAR(sentiment_score("good bad", lex), 0.1, 1e-15);
  EXPECT_DOUBLE_EQ(sentiment_score("GOOD", lex), 0.8);
}

TEST(Sentiment, LexiconFileErrorsNameLine) {
  try {
    SentimentLexicon::parse("good\t0.5\nbad -0.5\n");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(SentimentLexicon::parse("good\t1.5"), DataError);
  EXPECT_EQ(SentimentLexicon::parse("# c\n\ngood\t0.5\n").size(), 1u);
}

TEST(Tone, NeutralTextIsZero) {
  SentimentLexicon lex;
  auto t = combined_tone("The table is in the room.", lex, ToneWeights{});
  EXPECT_DOUBLE_EQ(t.combined, 0.0);
  EXPECT_EQ(t.sentence_count, 1u);
}

TEST(Tone, HandEvaluatedEquation) {
  ToneWeights w;
  w.holistic = 0.5;
  w.sentence = {1.0};
  EXPECT_NEAR(combine_tone(0.4, {0.2}, w), 0.40, 1e-12);
}

TEST(Tone, MaximallyPositive) {
  SentimentLexicon lex;
  lex.set("wonderful", 1.0);
  auto t = combined_tone("Wonderful! Wonderful wonderful.", lex, ToneWeights{});
  EXPECT_DOUBLE_EQ(t.holistic, 1.0);
  EXPECT_DOUBLE_EQ(t.combined, 1.0);
}

TEST(Tone, EmptyTextTreatedAsOneNeutralSentence) {
  auto t = combined_tone("", SentimentLexicon::builtin(), ToneWeights{});
  EXPECT_EQ(t.sentence_count, 1u);
  EXPECT_EQ(t.sentence_scores, std::vector<double>{0.0});
  EXPECT_DOUBLE_EQ(t.combined, 0.0);
}

TEST(ToneProperty, StoredCMatchesDirectEvaluation) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0), w01(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    std::size_t n = 1 + gen() % 6;
    std::vector<double> s(n), w(n);
    double h = u(gen);
    for (auto& x : s) x = u(gen);
    ToneWeights tw;
    tw.holistic = w01(gen);
    for (auto& x : w) x = w01(gen);
    tw.sentence = w;
    EXPECT_NEAR(combine_tone(h, s, tw), oracle::tone(h, s, tw.holistic, w), 1e-9);
  }
}

TEST(ToneProperty, DefaultWeightsStayInUnitInterval) {
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ToneWeights tw;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> s(1 + gen() % 5);
    for (auto& x : s) x = u(gen);
    double c = combine_tone(u(gen), s, tw);
    EXPECT_GE(c, -1.0);
    EXPECT_LE(c, 1.0);
  }
}

TEST(ToneProperty, PositiveTokenNeverLowersHolistic) {
  SentimentLexicon lex;
  lex.set("nice", 0.6);
  lex.set("sad", -0.4);
  lex.set("ok", 0.1);
  std::mt19937_64 gen(13);
  const char* vocab[] = {"nice", "sad", "ok", "table", "chair"};
  for (int i = 0; i < 300; ++i) {
    std::string text;
    for (int k = 0, n = 1 + static_cast<int>(gen() % 8); k < n; ++k) text += std::string(vocab[gen() % 5]) + " ";
    double before = sentiment_score(text, lex);
    double top = std::max(before, 0.0);
    // Appending a token at least as positive as the current mean cannot lower it.
    lex.set("peak", std::min(1.0, top + 0.05));
    EXPECT_GE(sentiment_score(text + "peak", lex), before - 1e-15);
  }
}

// --- specificity ----------------------------------------------------------

TEST(Specificity, Examples) {
  WordList desc{"delicious", "lovely"};
  SpecificityLimits lim{4, 2};
  EXPECT_DOUBLE_EQ(specificity("the cat sat on the mat", {}, desc, lim), 0.0);
  EXPECT_DOUBLE_EQ(specificity_score({4, 2}, lim), 1.0);
  EXPECT_DOUBLE_EQ(specificity_score({2, 1}, lim), 0.5);
  EXPECT_DOUBLE_EQ(specificity("We met Anna in Paris and had delicious soup.", {}, desc, lim), 0.5);
  EXPECT_DOUBLE_EQ(specificity_score({9, 9}, lim), 1.0);
}

TEST(Specificity, CapitalizedRunHeuristic) {
  EXPECT_EQ(capitalized_run_entities("Yesterday I saw New York City and I'm thrilled."), 1u);
  EXPECT_EQ(capitalized_run_entities("The Louvre. Paris is nice."), 1u);
  EntityMatcher none = [](std::string_view) { return std::size_t{0}; };
  EXPECT_EQ(specificity_counts("We met Anna", none, WordList{}).entities, 0u);
}

// --- embeddings and coherence ---------------------------------------------

TEST(Embedding, HashProviderIsDeterministicUnitNorm) {
  HashEmbeddingProvider p;
  auto a = p.embed_one("hello"), b = p.embed_one("hello");
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.dimension(), 64u);
  EXPECT_NEAR(dot(a, a), 1.0, 1e-12);
  EXPECT_NE(p.embed_one("hello"), p.embed_one("world"));
  EXPECT_NE(HashEmbeddingProvider(64, 1).embed_one("x"), HashEmbeddingProvider(64, 2).embed_one("x"));
}

TEST(Coherence, SingleTokenEntropyZero) {
  HashEmbeddingProvider p;
  std::vector<EmbeddingVector> v{p.embed_one("hi")};
  EXPECT_DOUBLE_EQ(token_entropy(v), 0.0);
  EXPECT_THROW(token_entropy(std::vector<EmbeddingVector>{}), PreconditionError);
}

TEST(Coherence, IdenticalTokensGiveLnK) {
  HashEmbeddingProvider p;
  for (std::size_t k = 2; k <= 7; ++k) {
    std::vector<EmbeddingVector> v(k, p.embed_one("same"));
    EXPECT_NEAR(token_entropy(v), std::log(static_cast<double>(k)), 1e-12);
    EXPECT_NEAR(coherence_gain(0.0, v), std::log(static_cast<double>(k)), 1e-12);
  }
  std::vector<EmbeddingVector> one{p.embed_one("x")};
  EXPECT_NEAR(coherence_gain(std::log(3.0), one), std::log(3.0), 1e-12);
}

TEST(Coherence, MatchesSoftmaxOracle) {
  HashEmbeddingProvider p;
  std::vector<std::string> toks{"the", "quick", "brown", "fox", "jumps"};
  auto vs = p.embed(toks);
  std::vector<std::vector<double>> rv;
  for (const auto& v : vs) rv.push_back(raw(v));
  EXPECT_NEAR(token_entropy(vs), oracle::mean_token_entropy(rv), 1e-12);
}

TEST(CoherenceProperty, BoundedAndPermutationInvariant) {
  HashEmbeddingProvider p;
  std::mt19937_64 gen(21);
  for (int i = 0; i < 100; ++i) {
    std::vector<std::string> toks;
    for (int k = 0, n = 1 + static_cast<int>(gen() % 12); k < n; ++k) toks.push_back("t" + std::to_string(gen() % 6));
    auto vs = p.embed(toks);
    double h = token_entropy(vs);
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log(static_cast<double>(toks.size())) + 1e-12);
    std::shuffle(toks.begin(), toks.end(), gen);
    EXPECT_NEAR(token_entropy(p.embed(toks)), h, 1e-12);
  }
}

TEST(Coherence, IdenticalResponseZeroGain) {
  HashEmbeddingProvider p;
  auto prev = response_entropy("nice weather we are having", p);
  auto vs = p.embed(tokenize("nice weather we are having"));
  EXPECT_DOUBLE_EQ(coherence_gain(prev, vs), 0.0);
}

// --- assistance -----------------------------------------------------------

TEST(Assistance, Examples) {
  HashEmbeddingProvider p;
  std::vector<std::string> keys{"help", "assist", "information"};
  EXPECT_DOUBLE_EQ(assistance_similarity("Happy to help anytime", keys, p), 1.0);
  EXPECT_DOUBLE_EQ(assistance_similarity("", keys, p), 0.0);
  EXPECT_THROW(assistance_similarity("x", {}, p), PreconditionError);
  // Golden value from the independent hash-embedding oracle, frozen.
  double v = assistance_similarity("sunset stroll", keys, p);
  EXPECT_NEAR(v, 0.24241180985794944, 1e-12);
  EXPECT_LT(v, EngineConfig{}.assistance_threshold);
}

// --- extract_all ----------------------------------------------------------

TEST(Features, EmptyResponse) {
  EngineConfig c;
  auto x = Extractors::local(c);
  auto f = extract_all("", std::string("Hello there, how are you today?"), c, x);
  EXPECT_EQ(f.brevity_tokens, 0u);
  EXPECT_DOUBLE_EQ(f.tone.combined, 0.0);
  EXPECT_DOUBLE_EQ(f.specificity, 0.0);
  EXPECT_DOUBLE_EQ(f.assistance_similarity, 0.0);
  EXPECT_DOUBLE_EQ(f.coherence_gain, response_entropy("Hello there, how are you today?", *x.embeddings));
}

TEST(Features, GoldenFixture) {
  EngineConfig c;
  auto x = Extractors::local(c);
  auto f = extract_all("We strolled past the Golden Gate Bridge at sunset. It was beautiful and the food was great!",
                       std::string("Hello there, how are you today?"), c, x);
  EXPECT_EQ(f.brevity_tokens, 17u);
  EXPECT_NEAR(f.tone.holistic, 0.7375, 1e-12);
  ASSERT_EQ(f.tone.sentence_scores.size(), 2u);
  EXPECT_NEAR(f.tone.sentence_scores[0], 0.0, 1e-12);
  EXPECT_NEAR(f.tone.sentence_scores[1], 0.7375, 1e-12);
  EXPECT_NEAR(f.tone.combined, 0.553125, 1e-12);
  EXPECT_NEAR(f.specificity, 0.25, 1e-12);
  EXPECT_NEAR(f.response_entropy, 2.7724576401236001, 1e-12);
  EXPECT_NEAR(f.coherence_gain, 1.0776131682961234, 1e-12);
  EXPECT_NEAR(f.assistance_similarity, 0.12581763551764985, 1e-12);
  EXPECT_NEAR(combine_tone(f.tone.holistic, f.tone.sentence_scores, c.tone_weights), f.tone.combined, 1e-12);
  EXPECT_EQ(feature_vector_from_json(to_json(f)), f);
}

TEST(FeaturesProperty, PureAndInRange) {
  EngineConfig c;
  auto x = Extractors::local(c);
  std::mt19937_64 gen(31);
  const char* vocab[] = {"great", "awful", "Paris", "the", "help", "beautiful", "we", "walked", "London", "sad"};
  for (int i = 0; i < 200; ++i) {
    std::string text;
    for (int k = 0, n = static_cast<int>(gen() % 25); k < n; ++k) {
      text += vocab[gen() % 10];
      text += (gen() % 6 == 0) ? ". " : " ";
    }
    auto a = extract_all(text, std::nullopt, c, x);
    EXPECT_EQ(a, extract_all(text, std::nullopt, c, x));
    EXPECT_GE(a.tone.combined, -1.0);
    EXPECT_LE(a.tone.combined, 1.0);
    EXPECT_GE(a.specificity, 0.0);
    EXPECT_LE(a.specificity, 1.0);
    EXPECT_GE(a.assistance_similarity, 0.0);
    EXPECT_LE(a.assistance_similarity, 1.0);
    EXPECT_EQ(a.tone.sentence_count, a.tone.sentence_scores.size());
    if (a.brevity_tokens > 0) EXPECT_LE(a.response_entropy, std::log(static_cast<double>(a.brevity_tokens)) + 1e-12);
  }
}

// --- shipped data files match the compiled-in copies ----------------------

TEST(DataFiles, LexiconMatchesBuiltin) {
  auto file = SentimentLexicon::parse(data_file("lexicon.tsv"));
  EXPECT_EQ(file.entries(), SentimentLexicon::builtin().entries());
  EXPECT_GT(file.size(), 50u);
}

TEST(DataFiles, DescriptiveMatchesBuiltin) {
  auto text = data_file("descriptive.txt");
  auto file = WordList::parse(text);
  EXPECT_EQ(file.size(), WordList::builtin_descriptive().size());
  std::istringstream lines(text);
  std::string line;
  std::size_t checked = 0;
  while (std::getline(lines, line)) {
    if (line.empty() || line[0] == '#') continue;
    EXPECT_TRUE(WordList::builtin_descriptive().contains(line)) << line;
    ++checked;
  }
  EXPECT_EQ(checked, file.size());
}

TEST(DataFiles, ClausesMatchBuiltin) {
  auto file = ClauseTable::parse(data_file("clauses.json"));
  for (Feature f : kAllFeatures) {
    EXPECT_EQ(file.at(f).implicit_text, ClauseTable::builtin().at(f).implicit_text);
    EXPECT_EQ(file.at(f).forced_text, ClauseTable::builtin().at(f).forced_text);
    EXPECT_EQ(file.at(f).keywords, ClauseTable::builtin().at(f).keywords);
  }
}
