#include "pindec/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "pindec/util.hpp"

namespace pindec::refine {

using util::kNegInf;
using util::log_add;

namespace {

size_t ascii_edit_distance(const std::string& a, const std::string& b) {
  std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1),
                         prev[j] + 1, cur[j - 1] + 1});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// 0 when the syllable is a reading of the character; otherwise the best
// normalized edit distance between the syllable and any reading, 1 if the
// character has none.
double pair_cost(int syllable, char32_t ch,
                 const homophone::HomophoneDictionary& dict,
                 const inventory::SyllableInventory& inv) {
  const auto* readings = dict.readings(ch);
  if (!readings || readings->empty()) return 1.0;
  const std::string& syl = inv.at(syllable);
  double best = 1.0;
  for (int r : *readings) {
    if (r == syllable) return 0.0;
    const std::string& cand = inv.at(r);
    double d = static_cast<double>(ascii_edit_distance(syl, cand)) /
               static_cast<double>(std::max(syl.size(), cand.size()));
    best = std::min(best, d);
  }
  return best;
}

}  // namespace

std::vector<AlignedPair> align(const inventory::PinyinSequence& pinyin_pred,
                               const std::u32string& chars,
                               const homophone::HomophoneDictionary& dict) {
  const auto& inv = dict.inv();
  const size_t M = pinyin_pred.units.size();
  const size_t J = chars.size();
  std::vector<double> dp((M + 1) * (J + 1));
  auto at = [&](size_t i, size_t j) -> double& { return dp[i * (J + 1) + j]; };
  auto diag_cost = [&](size_t i, size_t j) {
    return pair_cost(pinyin_pred.units[i - 1], chars[j - 1], dict, inv);
  };
  for (size_t i = 0; i <= M; ++i) at(i, 0) = static_cast<double>(i);
  for (size_t j = 0; j <= J; ++j) at(0, j) = static_cast<double>(j);
  for (size_t i = 1; i <= M; ++i)
    for (size_t j = 1; j <= J; ++j)
      at(i, j) = std::min({at(i - 1, j - 1) + diag_cost(i, j),
                           at(i - 1, j) + 1.0, at(i, j - 1) + 1.0});

  std::vector<AlignedPair> pairs;
  size_t i = M, j = J;
  constexpr double kTie = 1e-12;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      double c = diag_cost(i, j);
      if (std::fabs(at(i, j) - (at(i - 1, j - 1) + c)) <= kTie) {
        pairs.push_back({static_cast<int>(i - 1), static_cast<int>(j - 1),
                         c == 0.0 ? EditOp::Match : EditOp::Substitute});
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && std::fabs(at(i, j) - (at(i - 1, j) + 1.0)) <= kTie) {
      pairs.push_back({static_cast<int>(i - 1), -1, EditOp::Delete});
      --i;
      continue;
    }
    pairs.push_back({-1, static_cast<int>(j - 1), EditOp::Insert});
    --j;
  }
  std::reverse(pairs.begin(), pairs.end());
  return pairs;
}

namespace {

// unit-cost character alignment used to map lower hypotheses onto top-1
// positions; preference substitution > deletion > insertion, as in metrics
std::vector<AlignedPair> char_align(const std::u32string& ref,
                                    const std::u32string& hyp) {
  const size_t n = ref.size(), m = hyp.size();
  std::vector<size_t> dp((n + 1) * (m + 1));
  auto at = [&](size_t i, size_t j) -> size_t& { return dp[i * (m + 1) + j]; };
  for (size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (size_t i = 1; i <= n; ++i)
    for (size_t j = 1; j <= m; ++j)
      at(i, j) = std::min({at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1),
                           at(i - 1, j) + 1, at(i, j - 1) + 1});
  std::vector<AlignedPair> pairs;
  size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      pairs.push_back({static_cast<int>(i - 1), static_cast<int>(j - 1),
                       ref[i - 1] == hyp[j - 1] ? EditOp::Match
                                                : EditOp::Substitute});
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      pairs.push_back({static_cast<int>(i - 1), -1, EditOp::Delete});
      --i;
    } else {
      pairs.push_back({-1, static_cast<int>(j - 1), EditOp::Insert});
      --j;
    }
  }
  std::reverse(pairs.begin(), pairs.end());
  return pairs;
}

void add_candidate(LatticePosition& pos, char32_t ch, double log_score) {
  for (auto& c : pos.candidates) {
    if (c.ch == ch) {
      c.local_weight = log_add(c.local_weight, log_score);
      c.from_nbest = true;
      return;
    }
  }
  Candidate c;
  c.ch = ch;
  c.from_nbest = true;
  c.local_weight = log_score;
  pos.candidates.push_back(c);
}

void add_epsilon(LatticePosition& pos, double log_score) {
  if (pos.epsilon) {
    pos.epsilon->local_weight = log_add(pos.epsilon->local_weight, log_score);
  } else {
    Candidate c;
    c.from_nbest = true;
    c.local_weight = log_score;
    pos.epsilon = c;
  }
}

}  // namespace

RefinementLattice build_lattice(const inventory::PinyinSequence& pinyin_pred,
                                const std::vector<TextHypothesis>& nbest,
                                const homophone::HomophoneDictionary& dict,
                                size_t expansion_cap, double expansion_floor) {
  if (nbest.empty()) throw std::invalid_argument("empty nbest");

  const TextHypothesis& top = nbest.front();
  RefinementLattice lattice;
  lattice.dict = &dict;

  std::vector<AlignedPair> base = align(pinyin_pred, top.text, dict);
  std::vector<int> position_of_char(top.text.size(), -1);
  for (const AlignedPair& pair : base) {
    LatticePosition pos;
    if (pair.syll_slot >= 0) pos.anchor = pinyin_pred.units[pair.syll_slot];
    if (pair.char_slot >= 0) {
      position_of_char[pair.char_slot] =
          static_cast<int>(lattice.positions.size());
      add_candidate(pos, top.text[pair.char_slot], top.log_score);
    } else {
      // syllable the top hypothesis skipped; path may keep skipping it
      add_epsilon(pos, top.log_score);
    }
    lattice.positions.push_back(std::move(pos));
  }

  for (size_t h = 1; h < nbest.size(); ++h) {
    const TextHypothesis& hyp = nbest[h];
    // char_align reuses AlignedPair with syll_slot indexing top.text
    for (const AlignedPair& pair : char_align(top.text, hyp.text)) {
      if (pair.char_slot < 0) {
        // hypothesis drops this top-1 character
        add_epsilon(lattice.positions[position_of_char[pair.syll_slot]],
                    hyp.log_score);
      } else if (pair.syll_slot >= 0) {
        add_candidate(lattice.positions[position_of_char[pair.syll_slot]],
                      hyp.text[pair.char_slot], hyp.log_score);
      }
      // characters the top hypothesis has no slot for are dropped
    }
  }

  for (auto& pos : lattice.positions) {
    if (!pos.anchor) continue;
    double base_weight = kNegInf;
    for (const auto& c : pos.candidates)
      base_weight = std::max(base_weight, c.local_weight);
    if (base_weight == kNegInf) base_weight = top.log_score;
    size_t added = 0;
    for (char32_t ch : dict.chars_for(*pos.anchor)) {
      if (added == expansion_cap) break;
      bool present = false;
      for (const auto& c : pos.candidates) present = present || c.ch == ch;
      if (present) continue;
      Candidate c;
      c.ch = ch;
      c.from_pinyin_expansion = true;
      c.local_weight = base_weight + expansion_floor;
      pos.candidates.push_back(c);
      ++added;
    }
  }
  return lattice;
}

namespace {

struct BeamState {
  std::u32string text;
  double score = 0.0;
};

}  // namespace

RefineResult refine(const RefinementLattice& lattice, const Scorer& scorer,
                    const RefineWeights& weights, size_t beam) {
  if (beam < 1) throw std::invalid_argument("beam must be >= 1");
  if (!std::isfinite(weights.w_lm) || !std::isfinite(weights.w_ac) ||
      !std::isfinite(weights.w_py))
    throw std::invalid_argument("weights must be finite");

  std::vector<BeamState> states{BeamState{}};
  for (size_t p = 0; p < lattice.positions.size(); ++p) {
    const LatticePosition& pos = lattice.positions[p];
    if (pos.candidates.empty() && !pos.epsilon)
      throw std::invalid_argument("lattice position " + std::to_string(p) +
                                  " has no candidates");
    std::map<std::u32string, double> merged;
    auto offer = [&](std::u32string text, double score) {
      auto [it, fresh] = merged.emplace(std::move(text), score);
      if (!fresh && score > it->second) it->second = score;
    };
    for (const BeamState& st : states) {
      for (const Candidate& cand : pos.candidates) {
        double py_term = 0.0;
        if (pos.anchor)
          py_term = lattice.dict->has_reading(cand.ch, *pos.anchor) ? 0.0 : -1.0;
        double lm;
        try {
          lm = scorer.score(st.text, cand.ch);
        } catch (const std::exception& e) {
          throw std::runtime_error("scorer failed at lattice position " +
                                   std::to_string(p) + ": " + e.what());
        }
        double step = weights.w_lm * lm + weights.w_ac * cand.local_weight +
                      weights.w_py * py_term;
        offer(st.text + cand.ch, st.score + step);
      }
      if (pos.epsilon) {
        double py_term = pos.anchor ? -1.0 : 0.0;
        double step = weights.w_ac * pos.epsilon->local_weight +
                      weights.w_py * py_term;
        offer(st.text, st.score + step);
      }
    }
    states.clear();
    states.reserve(merged.size());
    for (auto& [text, score] : merged)
      states.push_back(BeamState{text, score});
    std::sort(states.begin(), states.end(),
              [](const BeamState& a, const BeamState& b) {
                if (a.score != b.score) return a.score > b.score;
                return a.text < b.text;
              });
    if (states.size() > beam) states.resize(beam);
  }

  const BeamState& best = states.front();
  return RefineResult{best.text, best.score};
}

}  // namespace pindec::refine
