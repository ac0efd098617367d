#include <map>
#include <string>

#include "doctest.h"
#include "pindec/metrics.hpp"
#include "pindec/rng.hpp"

using namespace pindec;
using metrics::EditCounts;

namespace {

// plain recursive Levenshtein, memoized; independent of the DP implementation
size_t oracle_distance(const std::u32string& a, const std::u32string& b,
                       size_t i, size_t j,
                       std::map<std::pair<size_t, size_t>, size_t>& memo) {
  if (i == a.size()) return b.size() - j;
  if (j == b.size()) return a.size() - i;
  auto key = std::make_pair(i, j);
  auto it = memo.find(key);
  if (it != memo.end()) return it->second;
  size_t best = oracle_distance(a, b, i + 1, j + 1, memo) +
                (a[i] == b[j] ? 0 : 1);
  best = std::min(best, oracle_distance(a, b, i + 1, j, memo) + 1);
  best = std::min(best, oracle_distance(a, b, i, j + 1, memo) + 1);
  memo[key] = best;
  return best;
}

size_t oracle(const std::u32string& ref, const std::u32string& hyp) {
  std::map<std::pair<size_t, size_t>, size_t> memo;
  return oracle_distance(ref, hyp, 0, 0, memo);
}

}  // namespace

TEST_CASE("edit_counts handles the degenerate cases") {
  CHECK(metrics::edit_counts(U"", U"") == EditCounts{0, 0, 0, 0});
  CHECK(metrics::edit_counts(U"abc", U"") == EditCounts{0, 3, 0, 3});
  CHECK(metrics::edit_counts(U"", U"ab") == EditCounts{0, 0, 2, 0});
  CHECK(metrics::edit_counts(U"abc", U"abc") == EditCounts{0, 0, 0, 3});
}

TEST_CASE("edit_counts basic substitutions deletions insertions") {
  CHECK(metrics::edit_counts(U"abc", U"axc") == EditCounts{1, 0, 0, 3});
  CHECK(metrics::edit_counts(U"abc", U"ac") == EditCounts{0, 1, 0, 3});
  CHECK(metrics::edit_counts(U"abc", U"abxc") == EditCounts{0, 0, 1, 3});
}

TEST_CASE("equal-cost alignments prefer substitution over indel pairs") {
  // "ca" -> "ac" costs 2 either as two substitutions or as delete+insert
  CHECK(metrics::edit_counts(U"ca", U"ac") == EditCounts{2, 0, 0, 2});
  CHECK(metrics::edit_counts(U"ab", U"ba") == EditCounts{2, 0, 0, 2});
}

TEST_CASE("edit_counts distance matches the recursive oracle") {
  rng::Rng gen(606);
  for (int trial = 0; trial < 800; ++trial) {
    std::u32string ref, hyp;
    size_t nr = gen.uniform_int(9), nh = gen.uniform_int(9);
    for (size_t i = 0; i < nr; ++i)
      ref.push_back(U'a' + static_cast<char32_t>(gen.uniform_int(4)));
    for (size_t i = 0; i < nh; ++i)
      hyp.push_back(U'a' + static_cast<char32_t>(gen.uniform_int(4)));
    auto counts = metrics::edit_counts(ref, hyp);
    CHECK(counts.distance() == oracle(ref, hyp));
    CHECK(counts.N == ref.size());
    // S + D alignments consume the reference; S + I consume the hypothesis
    CHECK(counts.S + counts.D <= ref.size());
    CHECK(ref.size() - counts.D + counts.I == hyp.size());
  }
}

TEST_CASE("edit_counts on utf-8 applies canonical composition first") {
  // "ü" decomposed vs composed must compare equal
  CHECK(metrics::edit_counts("l\xc3\xbc", "lu\xcc\x88") ==
        EditCounts{0, 0, 0, 2});
  CHECK(metrics::edit_counts("\xe6\x88\x91\xe4\xbb\xac", "\xe6\x88\x91") ==
        EditCounts{0, 1, 0, 2});
}

TEST_CASE("cer reports the paper's example pair as one substitution in five") {
  auto counts = metrics::edit_counts("我想去银行", "我想去银航");
  CHECK(counts == EditCounts{1, 0, 0, 5});
  auto value = metrics::cer(counts);
  CHECK(value.value == doctest::Approx(0.2).epsilon(1e-12));
  CHECK_FALSE(value.undefined_ref);
}

TEST_CASE("cer with an empty reference is flagged, not divided by zero") {
  auto value = metrics::cer(metrics::edit_counts(U"", U"ab"));
  CHECK(value.undefined_ref);
  CHECK(value.value == 2.0);  // raw insertion count
  auto clean = metrics::cer(metrics::edit_counts(U"", U""));
  CHECK_FALSE(clean.undefined_ref);
  CHECK(clean.value == 0.0);
}

TEST_CASE("corpus_cer pools counts rather than averaging rates") {
  std::vector<std::pair<std::string, std::string>> pairs{
      {"abcd", "abcd"},        // 0/4
      {"ab", "xy"},            // 2/2
  };
  auto report = metrics::corpus_cer(pairs);
  REQUIRE(report.per_utt.size() == 2);
  CHECK(report.pooled == EditCounts{2, 0, 0, 6});
  // micro average 2/6, not (0 + 1)/2
  CHECK(report.pooled_cer.value == doctest::Approx(2.0 / 6).epsilon(1e-12));
}
