#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pindec/homophone.hpp"
#include "pindec/inventory.hpp"
#include "pindec/scorer.hpp"

namespace pindec::refine {

struct TextHypothesis {
  std::u32string text;
  double log_score = 0.0;
};

enum class EditOp { Match, Substitute, Insert, Delete };

// One aligned pair of syllable slot (into the pinyin sequence) and character
// slot (into the hypothesis text). Insert = character without syllable,
// Delete = syllable without character; -1 marks the absent side.
struct AlignedPair {
  int syll_slot = -1;
  int char_slot = -1;
  EditOp op = EditOp::Match;
};

// Minimum-cost alignment at syllable granularity. Pairing a syllable with a
// character costs 0 when the syllable is one of the character's readings,
// otherwise the cheapest normalized string edit distance against any
// reading (1 for characters without readings). Insert/delete cost 1.
std::vector<AlignedPair> align(const inventory::PinyinSequence& pinyin_pred,
                               const std::u32string& chars,
                               const homophone::HomophoneDictionary& dict);

struct Candidate {
  char32_t ch = 0;
  bool from_nbest = false;
  bool from_pinyin_expansion = false;
  double local_weight = 0.0;  // log domain
};

struct LatticePosition {
  std::vector<Candidate> candidates;   // distinct characters
  std::optional<Candidate> epsilon;    // skip this position
  std::optional<int> anchor;           // aligned syllable id
};

struct RefinementLattice {
  std::vector<LatticePosition> positions;
  const homophone::HomophoneDictionary* dict = nullptr;
};

// Positions follow the alignment of the top-1 hypothesis against
// pinyin_pred. Candidates are the union of all hypotheses' characters at a
// position (weights log-added over proposing hypotheses) plus up to
// expansion_cap dictionary homophones of the anchor, ranked by dictionary
// order. Expansions are weighted expansion_floor below the position's best
// hypothesis weight.
RefinementLattice build_lattice(const inventory::PinyinSequence& pinyin_pred,
                                const std::vector<TextHypothesis>& nbest,
                                const homophone::HomophoneDictionary& dict,
                                size_t expansion_cap,
                                double expansion_floor = -4.605170185988091);

struct RefineWeights {
  double w_lm = 1.0;
  double w_ac = 0.5;
  double w_py = 1.0;
};

struct RefineResult {
  std::u32string text;
  double log_score = 0.0;
};

// Beam search over lattice paths maximizing
//   w_lm * scorer + w_ac * local weight + w_py * anchor agreement
// where anchor agreement is 0 when a candidate's readings include the
// anchored syllable and -1 otherwise (always 0 at unanchored positions).
// Ties break toward the lexicographically smaller text.
RefineResult refine(const RefinementLattice& lattice, const Scorer& scorer,
                    const RefineWeights& weights, size_t beam);

}  // namespace pindec::refine
