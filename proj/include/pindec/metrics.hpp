#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pindec::metrics {

struct EditCounts {
  size_t S = 0;
  size_t D = 0;
  size_t I = 0;
  size_t N = 0;
  size_t distance() const { return S + D + I; }
  bool operator==(const EditCounts&) const = default;
};

// Levenshtein with unit costs. Among equal-cost alignments the backtrace
// prefers substitution over deletion over insertion. Inputs are NFC-
// normalized Unicode scalars.
EditCounts edit_counts(std::string_view ref, std::string_view hyp);
EditCounts edit_counts(const std::u32string& ref, const std::u32string& hyp);

struct CerValue {
  double value = 0.0;
  // N = 0 with insertions: rate has no reference to divide by. value then
  // holds the raw insertion count.
  bool undefined_ref = false;
};

CerValue cer(const EditCounts& c);

struct CorpusReport {
  EditCounts pooled;
  CerValue pooled_cer;
  std::vector<EditCounts> per_utt;
};

// Micro-average: pooled CER = sum(S+D+I) / sum(N), not the mean of rates.
CorpusReport corpus_cer(
    const std::vector<std::pair<std::string, std::string>>& pairs);

}  // namespace pindec::metrics
