#include "pindec/metrics.hpp"

#include "pindec/util.hpp"

namespace pindec::metrics {

EditCounts edit_counts(const std::u32string& ref, const std::u32string& hyp) {
  const size_t n = ref.size(), m = hyp.size();
  std::vector<size_t> dp((n + 1) * (m + 1));
  auto at = [&](size_t i, size_t j) -> size_t& { return dp[i * (m + 1) + j]; };
  for (size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (size_t i = 1; i <= n; ++i)
    for (size_t j = 1; j <= m; ++j) {
      size_t sub = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      size_t del = at(i - 1, j) + 1;
      size_t ins = at(i, j - 1) + 1;
      at(i, j) = std::min(sub, std::min(del, ins));
    }

  EditCounts c;
  c.N = n;
  size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++c.S;
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++c.D;
      --i;
    } else {
      ++c.I;
      --j;
    }
  }
  return c;
}

EditCounts edit_counts(std::string_view ref, std::string_view hyp) {
  return edit_counts(util::nfc(util::utf8_decode(ref)),
                     util::nfc(util::utf8_decode(hyp)));
}

CerValue cer(const EditCounts& c) {
  if (c.N == 0) {
    if (c.I > 0) return {static_cast<double>(c.I), true};
    return {0.0, false};
  }
  return {static_cast<double>(c.distance()) / static_cast<double>(c.N), false};
}

CorpusReport corpus_cer(
    const std::vector<std::pair<std::string, std::string>>& pairs) {
  CorpusReport report;
  for (const auto& [ref, hyp] : pairs) {
    EditCounts c = edit_counts(ref, hyp);
    report.pooled.S += c.S;
    report.pooled.D += c.D;
    report.pooled.I += c.I;
    report.pooled.N += c.N;
    report.per_utt.push_back(c);
  }
  report.pooled_cer = cer(report.pooled);
  return report;
}

}  // namespace pindec::metrics
