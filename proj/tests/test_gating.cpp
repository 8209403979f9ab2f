#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "gobs/gate/decision.hpp"
#include "gobs/observer/rewrite.hpp"
#include "gobs/overlay/descriptor.hpp"

using namespace gobs;

namespace {

OverlayRule at_most(std::string id, Feature f, double threshold, double eps = 0.5, double urgent = 0.8,
                    int priority = 1) {
  OverlayRule r;
  r.id = std::move(id);
  r.feature = f;
  r.comparator = Comparator::at_most;
  r.threshold = threshold;
  r.rigidity = eps;
  r.urgent_threshold = urgent;
  r.priority = priority;
  return r;
}

FeatureVector with_tokens(std::size_t n) {
  FeatureVector f;
  f.brevity_tokens = n;
  return f;
}

Descriptor desc(std::string id, double deviation, bool urgent, Feature f = Feature::brevity, int priority = 1) {
  Descriptor d;
  d.rule_id = std::move(id);
  d.feature = f;
  d.deviation = deviation;
  d.urgent = urgent;
  d.priority = priority;
  d.text = "x";
  return d;
}

}  // namespace

// --- overlay --------------------------------------------------------------

TEST(Overlay, CompliantGivesNone) {
  EXPECT_FALSE(evaluate_rule(at_most("b", Feature::brevity, 40), with_tokens(30)).has_value());
  EXPECT_FALSE(evaluate_rule(at_most("b", Feature::brevity, 40), with_tokens(40)).has_value());
}

TEST(Overlay, BrevityDeviationHalf) {
  auto d = evaluate_rule(at_most("b", Feature::brevity, 40), with_tokens(60));
  ASSERT_TRUE(d);
  EXPECT_DOUBLE_EQ(d->deviation, 0.5);
  EXPECT_FALSE(d->urgent);
  EXPECT_EQ(d->text, "brevity is 60, expected 40");
}

TEST(Overlay, ToneBandDeviationThird) {
  OverlayRule r;
  r.id = "tone";
  r.feature = Feature::tone;
  r.comparator = Comparator::within_range;
  r.range = {-0.5, 1.0};
  r.urgent_threshold = 0.8;
  FeatureVector f;
  f.tone.combined = -1.0;
  auto d = evaluate_rule(r, f);
  ASSERT_TRUE(d);
  EXPECT_NEAR(d->deviation, 1.0 / 3.0, 1e-12);
  EXPECT_FALSE(d->urgent);
}

TEST(Overlay, AtLeastAndCapAndUrgentPrefix) {
  OverlayRule r = at_most("a", Feature::assistance, 0.5, 0.5, 0.9);
  r.comparator = Comparator::at_least;
  FeatureVector f;
  f.assistance_similarity = 0.4;
  EXPECT_NEAR(evaluate_rule(r, f)->deviation, 0.2, 1e-12);
  auto big = evaluate_rule(at_most("b", Feature::brevity, 40, 0.5, 0.8), with_tokens(400));
  EXPECT_DOUBLE_EQ(big->deviation, 1.0);
  EXPECT_TRUE(big->urgent);
  EXPECT_EQ(big->text.rfind(std::string(kUrgentPrefix), 0), 0u);
}

TEST(Overlay, OrderingUrgentFirstThenTieBreaks) {
  auto rs = validate_rules({at_most("z_tone", Feature::brevity, 40, 0.5, 0.5, 1),
                            at_most("a_brev", Feature::brevity, 100, 0.5, 0.95, 1)});
  auto ds = evaluate_all(rs, with_tokens(190));
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds[0].rule_id, "z_tone");  // deviation 1.0 urgent
  EXPECT_EQ(ds[1].rule_id, "a_brev");  // 0.9, not urgent
  auto tie = validate_rules({at_most("b", Feature::brevity, 40, 0.5, 0.8, 2),
                             at_most("a", Feature::brevity, 40, 0.5, 0.8, 2),
                             at_most("c", Feature::brevity, 40, 0.5, 0.8, 1)});
  auto td = evaluate_all(tie, with_tokens(60));
  ASSERT_EQ(td.size(), 3u);
  EXPECT_EQ(td[0].rule_id, "c");
  EXPECT_EQ(td[1].rule_id, "a");
  EXPECT_EQ(td[2].rule_id, "b");
  EXPECT_TRUE(evaluate_all(tie, with_tokens(10)).empty());
}

TEST(Overlay, NumberFormatting) {
  EXPECT_EQ(format_number(40.0), "40");
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_EQ(format_number(-0.125), "-0.125");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.333");
}

TEST(OverlayProperty, SoundnessScalingUrgencyAndOrder) {
  std::mt19937_64 gen(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 300; ++i) {
    std::vector<OverlayRule> rules;
    for (int k = 0; k < 5; ++k) {
      auto r = at_most("r" + std::to_string(k), Feature::brevity, 10 + gen() % 60, u(gen),
                       std::max(0.01, u(gen)), 1 + static_cast<int>(gen() % 3));
      if (k % 2) r.comparator = Comparator::at_least;
      rules.push_back(r);
    }
    auto f = with_tokens(gen() % 120);
    for (const auto& r : rules) {
      auto d = evaluate_rule(r, f);
      EXPECT_EQ(!d.has_value(), rule_satisfied(r, feature_value(f, r.feature)));
      if (d) {
        EXPECT_GE(d->deviation, 0.0);
        EXPECT_LE(d->deviation, 1.0);
        EXPECT_EQ(d->urgent, d->deviation >= r.urgent_threshold);
        EXPECT_FALSE(d->text.empty());
      }
    }
    auto out = evaluate_all(validate_rules(rules), f);
    std::shuffle(rules.begin(), rules.end(), gen);
    EXPECT_EQ(evaluate_all(validate_rules(rules), f), out);
  }
  // Doubling the overshoot doubles the deviation below the cap.
  auto r = at_most("b", Feature::brevity, 100);
  for (std::size_t over = 1; over <= 40; ++over)
    EXPECT_NEAR(rule_deviation(r, 100.0 + 2 * over), 2 * rule_deviation(r, 100.0 + over), 1e-12);
}

// --- observer -------------------------------------------------------------

TEST(Observer, ImplicitNoneWhenEmpty) { EXPECT_FALSE(synthesize_implicit({}).has_value()); }

TEST(Observer, ImplicitBrevityClause) {
  auto d = synthesize_implicit({desc("brevity", 0.5, false)});
  ASSERT_TRUE(d);
  EXPECT_EQ(d->kind, DirectiveKind::implicit);
  EXPECT_NE(d->text.find("more concise reply"), std::string::npos);
  EXPECT_EQ(d->source_rule_ids, std::vector<std::string>{"brevity"});
}

TEST(Observer, ImplicitClausesInDescriptorOrder) {
  auto d = synthesize_implicit({desc("brevity", 0.7, false), desc("tone", 0.3, false, Feature::tone)});
  ASSERT_TRUE(d);
  auto b = d->text.find(ClauseTable::builtin().at(Feature::brevity).implicit_text);
  auto t = d->text.find(ClauseTable::builtin().at(Feature::tone).implicit_text);
  ASSERT_NE(b, std::string::npos);
  ASSERT_NE(t, std::string::npos);
  EXPECT_LT(b, t);
}

TEST(Observer, ForcedCoherenceAndExemplar) {
  auto d = synthesize_forced({desc("coherence", 0.95, true, Feature::coherence)}, std::nullopt);
  EXPECT_EQ(d.kind, DirectiveKind::forced);
  EXPECT_NE(d.text.find("off-topic"), std::string::npos);
  EXPECT_NE(d.text.find("provide a relevant"), std::string::npos);
  EXPECT_NE(d.text.find("Urgent"), std::string::npos);
  EXPECT_NE(d.text.find("coherence"), std::string::npos);
  EXPECT_FALSE(d.includes_example);
  auto e = synthesize_forced({desc("brevity", 0.5, false)}, std::string("Nice weather today."));
  EXPECT_TRUE(e.includes_example);
  EXPECT_TRUE(e.text.ends_with("Nice weather today."));
  EXPECT_THROW(synthesize_forced({}, std::nullopt), PreconditionError);
}

TEST(ObserverProperty, CorrespondenceAndDeterminism) {
  std::mt19937_64 gen(51);
  for (int i = 0; i < 200; ++i) {
    std::vector<Descriptor> ds;
    for (int k = 0, n = 1 + static_cast<int>(gen() % 5); k < n; ++k) {
      Feature f = kAllFeatures[gen() % 5];
      ds.push_back(desc("r" + std::to_string(k), (gen() % 100) / 100.0, gen() % 2, f));
    }
    auto forced = synthesize_forced(ds, std::nullopt);
    EXPECT_EQ(forced, synthesize_forced(ds, std::nullopt));
    for (const auto& id : forced.source_rule_ids)
      EXPECT_TRUE(std::any_of(ds.begin(), ds.end(), [&](const Descriptor& d) { return d.rule_id == id; }));
    for (const auto& d : ds)
      if (d.urgent) EXPECT_NE(forced.text.find("Urgent: Rule " + d.rule_id + ":"), std::string::npos);
    EXPECT_FALSE(synthesize_implicit(ds)->text.empty());
  }
}

TEST(Rewrite, EchoIsIdentityOnText) {
  auto original = synthesize_forced({desc("brevity", 0.5, false)}, std::nullopt);
  CallbackChatClient echo([](std::span<const ChatMessage> m, const ChatParams&) { return m.back().content; });
  auto r = rewrite_with_model(original, echo);
  EXPECT_EQ(r.directive, original);
  EXPECT_FALSE(r.warning);
}

TEST(Rewrite, ParaphraseKeepsKindAndIds) {
  auto original = synthesize_forced({desc("brevity", 0.5, false)}, std::nullopt);
  CallbackChatClient para([](std::span<const ChatMessage>, const ChatParams&) {
    return std::string("Please keep it short.");
  });
  auto r = rewrite_with_model(original, para);
  EXPECT_EQ(r.directive.text, "Please keep it short.");
  EXPECT_EQ(r.directive.kind, original.kind);
  EXPECT_EQ(r.directive.source_rule_ids, original.source_rule_ids);
}

TEST(Rewrite, DroppedMentionFallsBack) {
  auto original = synthesize_forced({desc("brevity", 0.5, false), desc("tone", 0.4, false, Feature::tone)},
                                    std::nullopt);
  CallbackChatClient drop([](std::span<const ChatMessage>, const ChatParams&) {
    return std::string("Please keep it short.");
  });
  auto r = rewrite_with_model(original, drop);
  EXPECT_EQ(r.directive, original);
  EXPECT_TRUE(r.warning);
}

TEST(Rewrite, UnreachableFallsBack) {
  auto original = synthesize_forced({desc("brevity", 0.5, false)}, std::nullopt);
  CallbackChatClient down([](std::span<const ChatMessage>, const ChatParams&) -> std::string {
    throw TransportError("connection refused");
  });
  auto r = rewrite_with_model(original, down);
  EXPECT_EQ(r.directive, original);
  ASSERT_TRUE(r.warning);
  CallbackChatClient blank([](std::span<const ChatMessage>, const ChatParams&) { return std::string("  "); });
  EXPECT_EQ(rewrite_with_model(original, blank).directive, original);
}

// --- gate -----------------------------------------------------------------

TEST(Rng, CounterBasedAndReplayable) {
  RngState a(99), b(99);
  std::vector<double> xs;
  for (int i = 0; i < 10; ++i) {
    xs.push_back(a.uniform());
    EXPECT_EQ(xs.back(), b.uniform());
    EXPECT_GE(xs.back(), 0.0);
    EXPECT_LT(xs.back(), 1.0);
  }
  RngState c(99, 4);
  EXPECT_EQ(c.uniform(), xs[4]);
  EXPECT_EQ(a.counter(), 10u);
}

TEST(Gate, EmptyAccepts) {
  EngineConfig c;
  RngState rng(1);
  auto d = decide({}, validate_rules({}), 0, rng, c);
  EXPECT_EQ(d.kind, DecisionKind::accept);
  EXPECT_FALSE(d.directive);
  EXPECT_EQ(rng.counter(), 0u);
}

TEST(Gate, RigidViolationRejectsThenExhausts) {
  EngineConfig c;
  auto rs = validate_rules({at_most("brevity", Feature::brevity, 40, 1.0)});
  auto ds = evaluate_all(rs, with_tokens(60));
  RngState rng(1);
  auto d = decide(ds, rs, 1, rng, c);
  EXPECT_EQ(d.kind, DecisionKind::reject);
  ASSERT_TRUE(d.directive);
  EXPECT_EQ(d.directive->kind, DirectiveKind::forced);
  auto last = decide(ds, rs, 3, rng, c);
  EXPECT_EQ(last.kind, DecisionKind::accept);
  EXPECT_TRUE(last.budget_exhausted);
  EXPECT_FALSE(last.directive);
  EXPECT_THROW(decide(ds, rs, 4, rng, c), PreconditionError);
}

TEST(Gate, SoftViolationImplicitOrSparingForced) {
  EngineConfig c;
  auto rs = validate_rules({at_most("brevity", Feature::brevity, 40, 0.5, 0.4)});
  auto ds = evaluate_all(rs, with_tokens(60));  // deviation 0.5, urgent
  c.forced_feedback_probability = 0.0;
  RngState rng(3);
  auto d = decide(ds, rs, 0, rng, c);
  EXPECT_EQ(d.kind, DecisionKind::accept_with_implicit);
  EXPECT_EQ(d.directive->kind, DirectiveKind::implicit);
  c.forced_feedback_probability = 1.0;
  EXPECT_EQ(decide(ds, rs, 0, rng, c).kind, DecisionKind::reject);
  EXPECT_EQ(decide(ds, rs, 3, rng, c).kind, DecisionKind::accept_with_implicit);
  auto calm = validate_rules({at_most("brevity", Feature::brevity, 40, 0.5, 0.9)});
  EXPECT_EQ(decide(evaluate_all(calm, with_tokens(60)), calm, 0, rng, c).kind, DecisionKind::accept_with_implicit);
}

TEST(Gate, RankCandidates) {
  std::vector<std::vector<Descriptor>> cands{{desc("a", 0.7, false), desc("b", 0.5, false)},
                                             {desc("a", 0.3, false)},
                                             {desc("a", 0.9, false)}};
  EXPECT_EQ(rank_candidates(cands), 1u);
  std::vector<std::vector<Descriptor>> single{{desc("a", 0.9, true)}};
  EXPECT_EQ(rank_candidates(single), 0u);
  std::vector<std::vector<Descriptor>> tied{{desc("a", 0.4, false)}, {desc("a", 0.4, false)}};
  EXPECT_EQ(rank_candidates(tied), 0u);
  std::vector<std::vector<Descriptor>> urgent{{desc("a", 0.1, true)}, {desc("a", 0.9, false)}};
  EXPECT_EQ(rank_candidates(urgent), 1u);
  EXPECT_THROW(rank_candidates(std::vector<std::vector<Descriptor>>{}), PreconditionError);
}

TEST(GateProperty, InvariantsMonotonicityDeterminism) {
  std::mt19937_64 gen(61);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto rank = [](DecisionKind k) { return k == DecisionKind::accept ? 0 : k == DecisionKind::accept_with_implicit ? 1 : 2; };
  for (int i = 0; i < 2000; ++i) {
    EngineConfig c;
    c.forced_feedback_probability = u(gen);
    c.rigid_cutoff = u(gen);
    c.max_regenerations = 1 + static_cast<int>(gen() % 4);
    const double eps = u(gen);
    const double eps_up = eps + (1.0 - eps) * u(gen);
    auto rule = at_most("r", Feature::brevity, 40, eps, std::max(0.05, u(gen)));
    auto rs = validate_rules({rule});
    auto ds = evaluate_all(rs, with_tokens(40 + gen() % 60));
    const int attempt = static_cast<int>(gen() % (c.max_regenerations + 1));
    const std::uint64_t seed = gen();

    RngState r1(seed), r2(seed);
    auto d1 = decide(ds, rs, attempt, r1, c);
    EXPECT_EQ(d1, decide(ds, rs, attempt, r2, c));

    if (d1.kind == DecisionKind::reject) {
      ASSERT_TRUE(d1.directive);
      EXPECT_EQ(d1.directive->kind, DirectiveKind::forced);
      EXPECT_LT(attempt, c.max_regenerations);
    }
    if (d1.kind == DecisionKind::accept && !d1.budget_exhausted) EXPECT_FALSE(d1.directive);
    if (d1.budget_exhausted) {
      EXPECT_EQ(attempt, c.max_regenerations);
      EXPECT_TRUE(rigid_violation(rule, ds.at(0), c));
    }

    auto stricter = rule;
    stricter.rigidity = eps_up;
    auto rs_up = validate_rules({stricter});
    RngState r3(seed);
    auto d_up = decide(ds, rs_up, attempt, r3, c);
    if (d1.kind == DecisionKind::reject) EXPECT_EQ(d_up.kind, DecisionKind::reject);
    if (attempt < c.max_regenerations) EXPECT_GE(rank(d_up.kind), rank(d1.kind));
  }
}
