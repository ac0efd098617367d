#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "pindec/posterior.hpp"

namespace pindec::ctc {

inline constexpr int kBlank = 0;

struct InfeasibleTargetError : std::runtime_error {
  InfeasibleTargetError(size_t frames, size_t needed)
      : std::runtime_error("target needs at least " + std::to_string(needed) +
                           " frames, posterior has " + std::to_string(frames)),
        frames(frames),
        needed(needed) {}
  size_t frames;
  size_t needed;
};

struct Hypothesis {
  std::vector<int> tokens;  // collapsed, no blanks
  double log_score = 0.0;
  bool operator==(const Hypothesis&) const = default;
};

struct NBestList {
  std::vector<Hypothesis> items;  // log_score descending, tokens distinct
};

// The B mapping: merge adjacent duplicates, then drop blanks.
std::vector<int> collapse(const std::vector<int>& alignment,
                          int blank = kBlank);

struct CtcResult {
  double loss = 0.0;               // -log P(target | posteriors)
  std::vector<double> grad;        // frames x vocab, d loss / d log p_t(v)
};

// Forward-backward over the extended label sequence, entirely in log domain.
// The grad rows each sum to -1 (all alignment mass passes through each
// frame). `logp` is frames x vocab row-major; rows need not be normalized
// here, which is what makes finite-difference probes of single entries
// well-defined. The PosteriorMatrix overload enforces normalization.
CtcResult ctc_loss(const std::vector<double>& logp, size_t frames,
                   size_t vocab, const std::vector<int>& target);
CtcResult ctc_loss(const posterior::PosteriorMatrix& p,
                   const std::vector<int>& target);

// Frames where the target is infeasible throw InfeasibleTargetError; the
// minimum is |target| plus the number of equal adjacent pairs.
size_t min_frames(const std::vector<int>& target);

// Per-frame argmax path (ties toward the lowest id), collapsed. log_score is
// the sum of the chosen per-frame log-probs.
Hypothesis greedy_decode(const posterior::PosteriorMatrix& p);

// Standard CTC prefix beam search tracking blank/non-blank mass per
// collapsed prefix. Ties break toward the shorter prefix, then lexicographic
// token ids. Prefixes with no finite mass are dropped.
NBestList prefix_beam_search(const posterior::PosteriorMatrix& p,
                             size_t beam_width, size_t k);

}  // namespace pindec::ctc
