#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gobs/engine/record.hpp"
#include "gobs/eval/score.hpp"
#include "gobs/eval/stats.hpp"

namespace gobs {

// Observer trigger accounting over gated turns.
struct TriggerStats {
  std::size_t turns = 0;
  std::size_t implicit_turns = 0;       // accepted with an implicit directive
  std::size_t forced_turns = 0;         // at least one forced directive
  std::size_t total_forced = 0;         // sum of forced_count
  std::size_t total_regenerations = 0;  // candidates beyond the first
  std::size_t budget_exhausted = 0;

  double implicit_rate() const { return turns ? static_cast<double>(implicit_turns) / turns : 0.0; }
  double forced_rate() const { return turns ? static_cast<double>(forced_turns) / turns : 0.0; }
  double forced_per_forced_turn() const {
    return forced_turns ? static_cast<double>(total_forced) / forced_turns : 0.0;
  }

  void add(const EvaluationRecord& r) {
    ++turns;
    if (!r.decisions.empty() && r.decisions.back().kind == DecisionKind::accept_with_implicit) ++implicit_turns;
    if (r.forced_count > 0) ++forced_turns;
    total_forced += static_cast<std::size_t>(r.forced_count);
    if (!r.candidates.empty()) total_regenerations += r.candidates.size() - 1;
    if (r.budget_exhausted()) ++budget_exhausted;
  }
};

inline TriggerStats trigger_stats(const std::vector<EvaluationRecord>& records) {
  TriggerStats s;
  for (const auto& r : records) s.add(r);
  return s;
}

struct ReportInput {
  std::string title = "Evaluation report";
  std::string mode;  // empty: not an engine run
  std::size_t conversations = 0;
  std::vector<ConversationScores> scores;
  std::vector<CriterionMeans> means;
  std::optional<TriggerStats> triggers;
  // Automatic-vs-rater kappa per criterion, when annotations were supplied.
  std::vector<std::pair<Criterion, std::optional<double>>> agreement;
};

namespace detail {

inline std::string fmt(double v) {
  if (std::isnan(v)) return "n/a";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

struct PairedRow {
  Criterion criterion = Criterion::brevity;
  std::size_t n = 0;
  std::optional<stats::WilcoxonResult> w;
  double p_holm = NAN;
  std::optional<stats::PairedTResult> t;
  std::optional<stats::BrownForsytheResult> bf;
  double likeness_mean = NAN;
  double likeness_sd = NAN;
};

inline std::vector<PairedRow> paired_rows(const std::vector<CriterionMeans>& means) {
  std::vector<PairedRow> rows;
  for (Criterion c : kAllCriteria) {
    std::vector<double> h, a, like;
    for (const auto& m : means)
      if (m.criterion == c) {
        h.push_back(m.human_mean);
        a.push_back(m.agent_mean);
        like.push_back(m.likeness().value);
      }
    if (h.empty()) continue;
    PairedRow r;
    r.criterion = c;
    r.n = h.size();
    r.likeness_mean = stats::mean(like);
    r.likeness_sd = like.size() > 1 ? stats::sample_sd(like) : NAN;
    r.w = stats::wilcoxon_signed_rank(h, a);
    try {
      r.t = stats::paired_t(h, a);
    } catch (const PreconditionError&) {
    }
    try {
      r.bf = stats::brown_forsythe({h, a});
    } catch (const PreconditionError&) {
    }
    rows.push_back(std::move(r));
  }
  std::vector<double> ps;
  for (const auto& r : rows) ps.push_back(r.w->p);
  auto adj = stats::holm_correct(ps);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].p_holm = adj[i];
  return rows;
}

// Mean agent score per criterion by ordinal agent-turn position.
inline std::vector<std::pair<std::size_t, std::array<double, 4>>> by_agent_index(
    const std::vector<ConversationScores>& scores) {
  std::vector<std::array<double, 4>> sums;
  std::vector<std::size_t> counts;
  for (const auto& cs : scores) {
    std::size_t k = 0;
    for (const auto& t : cs.turns) {
      if (t.speaker != Speaker::agent) continue;
      if (k >= sums.size()) {
        sums.push_back({0, 0, 0, 0});
        counts.push_back(0);
      }
      for (std::size_t c = 0; c < 4; ++c) sums[k][c] += t.scores[c];
      ++counts[k];
      ++k;
    }
  }
  std::vector<std::pair<std::size_t, std::array<double, 4>>> out;
  for (std::size_t k = 0; k < sums.size(); ++k) {
    std::array<double, 4> m{};
    for (std::size_t c = 0; c < 4; ++c) m[c] = sums[k][c] / static_cast<double>(counts[k]);
    out.push_back({k, m});
  }
  return out;
}

}  // namespace detail

struct RenderedReport {
  std::string markdown;
  std::string csv;
};

// Deterministic rendering: the same input always yields the same bytes.
inline RenderedReport render_report(const ReportInput& in) {
  using detail::fmt;
  std::ostringstream md, csv;
  csv << "section,key,value\n";
  auto row = [&](const std::string& section, const std::string& key, const std::string& value) {
    csv << section << ',' << key << ',' << value << '\n';
  };

  md << "# " << in.title << "\n\n";
  if (!in.mode.empty()) {
    md << "Mode: " << in.mode << "\n\n";
    row("run", "mode", in.mode);
  }
  md << "Conversations: " << in.conversations << "\n\n";
  row("run", "conversations", std::to_string(in.conversations));

  auto rows = detail::paired_rows(in.means);

  md << "## Human-likeness\n\n| criterion | n | mean | sd |\n|---|---|---|---|\n";
  for (const auto& r : rows) {
    std::string c(to_string(r.criterion));
    md << "| " << c << " | " << r.n << " | " << fmt(r.likeness_mean) << " | " << fmt(r.likeness_sd) << " |\n";
    row("human_likeness", c + ".n", std::to_string(r.n));
    row("human_likeness", c + ".mean", fmt(r.likeness_mean));
    row("human_likeness", c + ".sd", fmt(r.likeness_sd));
  }

  md << "\n## Human vs agent (per-conversation mean scores)\n\n"
        "| criterion | n | W+ | W- | z | p | p (Holm) | t | p (t) | F' | p (F') |\n"
        "|---|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    std::string c(to_string(r.criterion));
    double t = r.t ? r.t->t : NAN, pt = r.t ? r.t->p : NAN;
    double f = r.bf ? r.bf->f : NAN, pf = r.bf ? r.bf->p : NAN;
    md << "| " << c << " | " << r.n << " | " << fmt(r.w->w_plus) << " | " << fmt(r.w->w_minus) << " | "
       << fmt(r.w->z) << " | " << fmt(r.w->p) << " | " << fmt(r.p_holm) << " | " << fmt(t) << " | " << fmt(pt)
       << " | " << fmt(f) << " | " << fmt(pf) << " |\n";
    row("tests", c + ".wilcoxon_w_plus", fmt(r.w->w_plus));
    row("tests", c + ".wilcoxon_w_minus", fmt(r.w->w_minus));
    row("tests", c + ".wilcoxon_z", fmt(r.w->z));
    row("tests", c + ".wilcoxon_p", fmt(r.w->p));
    row("tests", c + ".wilcoxon_p_holm", fmt(r.p_holm));
    row("tests", c + ".t", fmt(t));
    row("tests", c + ".t_p", fmt(pt));
    row("tests", c + ".brown_forsythe_f", fmt(f));
    row("tests", c + ".brown_forsythe_p", fmt(pf));
  }

  if (in.triggers) {
    const auto& s = *in.triggers;
    md << "\n## Observer triggers\n\n| turns | implicit | implicit rate | forced | forced rate | "
          "forced per forced turn | regenerations | budget exhausted |\n|---|---|---|---|---|---|---|---|\n";
    md << "| " << s.turns << " | " << s.implicit_turns << " | " << fmt(s.implicit_rate()) << " | " << s.forced_turns
       << " | " << fmt(s.forced_rate()) << " | " << fmt(s.forced_per_forced_turn()) << " | " << s.total_regenerations
       << " | " << s.budget_exhausted << " |\n";
    row("triggers", "turns", std::to_string(s.turns));
    row("triggers", "implicit_turns", std::to_string(s.implicit_turns));
    row("triggers", "implicit_rate", fmt(s.implicit_rate()));
    row("triggers", "forced_turns", std::to_string(s.forced_turns));
    row("triggers", "forced_rate", fmt(s.forced_rate()));
    row("triggers", "forced_per_forced_turn", fmt(s.forced_per_forced_turn()));
    row("triggers", "total_regenerations", std::to_string(s.total_regenerations));
    row("triggers", "budget_exhausted", std::to_string(s.budget_exhausted));
  }

  if (!in.agreement.empty()) {
    md << "\n## Automatic vs rater agreement\n\n| criterion | kappa |\n|---|---|\n";
    for (const auto& [c, k] : in.agreement) {
      std::string name(to_string(c));
      md << "| " << name << " | " << fmt(k.value_or(NAN)) << " |\n";
      row("agreement", name + ".kappa", fmt(k.value_or(NAN)));
    }
  }

  md << "\n## Mean agent score by turn position\n\n| position | brevity | tone | specificity | coherence |\n"
        "|---|---|---|---|---|\n";
  for (const auto& [k, m] : detail::by_agent_index(in.scores)) {
    md << "| " << k << " | " << fmt(m[0]) << " | " << fmt(m[1]) << " | " << fmt(m[2]) << " | " << fmt(m[3])
       << " |\n";
    for (Criterion c : kAllCriteria)
      row("by_position", std::to_string(k) + "." + std::string(to_string(c)), fmt(m[criterion_index(c)]));
  }
  return {md.str(), csv.str()};
}

// Writes report.md and report.csv into `dir`.
inline void write_report(const RenderedReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, body] : {std::pair{"report.md", &r.markdown}, std::pair{"report.csv", &r.csv}}) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    out << *body;
    out.flush();
    if (!out) throw Error("cannot write " + (dir / name).string());
  }
}

}  // namespace gobs
