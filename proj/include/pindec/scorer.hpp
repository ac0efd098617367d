#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace pindec::refine {

// Pluggable language scorer. Per-step scores are log-probabilities (<= 0);
// score_sequence defaults to their sum, and implementations that override it
// must keep the two consistent.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double score(const std::u32string& prefix, char32_t next) const = 0;
  virtual double score_sequence(const std::u32string& s) const {
    double total = 0.0;
    std::u32string prefix;
    prefix.reserve(s.size());
    for (char32_t ch : s) {
      total += score(prefix, ch);
      prefix.push_back(ch);
    }
    return total;
  }
};

// score() == 0 everywhere; stands in for "no language evidence".
class UniformScorer : public Scorer {
 public:
  double score(const std::u32string&, char32_t) const override { return 0.0; }
};

// Add-k smoothed character n-gram model with begin/end markers. For every
// context the distribution over observed-vocabulary + end sums to exactly 1;
// unobserved continuations get the zero-count mass.
class NgramScorer : public Scorer {
 public:
  static constexpr char32_t kBos = 0x0002;
  static constexpr char32_t kEos = 0x0003;

  NgramScorer(int order, double k) : order_(order), k_(k) {
    if (order < 1 || order > 5)
      throw std::invalid_argument("order must be in [1,5]");
    if (!(k > 0.0)) throw std::invalid_argument("k must be positive");
  }

  int order() const { return order_; }
  double smoothing() const { return k_; }
  size_t vocab_size() const { return vocab_.size(); }

  void observe_line(const std::u32string& line);

  double score(const std::u32string& prefix, char32_t next) const override;
  // probability of ending the sequence after prefix
  double end_score(const std::u32string& prefix) const;

  void save(std::ostream& out) const;
  static NgramScorer load(std::istream& in);

 private:
  struct ContextCounts {
    std::uint64_t total = 0;
    std::map<char32_t, std::uint64_t> next;
  };
  std::u32string context_of(const std::u32string& prefix) const;
  double score_event(const std::u32string& prefix, char32_t event) const;

  int order_;
  double k_;
  std::set<char32_t> vocab_;  // observed characters, no markers
  std::map<std::u32string, ContextCounts> counts_;
};

// Each line is one training sequence. Throws if no line yields content.
NgramScorer train_ngram(const std::vector<std::string>& corpus_lines, int order,
                        double k);

}  // namespace pindec::refine
