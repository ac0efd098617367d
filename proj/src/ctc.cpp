#include "pindec/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "pindec/util.hpp"

namespace pindec::ctc {

using util::kNegInf;
using util::log_add;

std::vector<int> collapse(const std::vector<int>& alignment, int blank) {
  std::vector<int> out;
  int prev = blank;
  for (int id : alignment) {
    if (id != prev && id != blank) out.push_back(id);
    prev = id;
  }
  return out;
}

size_t min_frames(const std::vector<int>& target) {
  size_t dups = 0;
  for (size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++dups;
  return target.size() + dups;
}

CtcResult ctc_loss(const std::vector<double>& logp, size_t frames,
                   size_t vocab, const std::vector<int>& target) {
  if (logp.size() != frames * vocab)
    throw std::invalid_argument("logp shape mismatch");
  for (int id : target) {
    if (id == kBlank) throw std::invalid_argument("target contains blank");
    if (id < 0 || static_cast<size_t>(id) >= vocab)
      throw std::invalid_argument("target id out of range");
  }
  const size_t needed = min_frames(target);
  if (frames < needed) throw InfeasibleTargetError(frames, needed);

  CtcResult result;
  result.grad.assign(frames * vocab, 0.0);
  if (frames == 0) return result;  // empty target over zero frames

  // extended sequence: blank, t1, blank, t2, ..., blank
  const size_t L = target.size();
  const size_t S = 2 * L + 1;
  auto label = [&](size_t s) -> int {
    return (s % 2 == 0) ? kBlank : target[s / 2];
  };
  auto lp = [&](size_t t, int v) { return logp[t * vocab + v]; };

  std::vector<double> alpha(frames * S, kNegInf);
  std::vector<double> beta(frames * S, kNegInf);

  alpha[0 * S + 0] = lp(0, label(0));
  if (S > 1) alpha[0 * S + 1] = lp(0, label(1));
  for (size_t t = 1; t < frames; ++t) {
    for (size_t s = 0; s < S; ++s) {
      double acc = alpha[(t - 1) * S + s];
      if (s >= 1) acc = log_add(acc, alpha[(t - 1) * S + s - 1]);
      // skip transition allowed between distinct non-blank labels
      if (s >= 2 && label(s) != kBlank && label(s) != label(s - 2))
        acc = log_add(acc, alpha[(t - 1) * S + s - 2]);
      alpha[t * S + s] = acc + lp(t, label(s));
    }
  }

  double log_p = alpha[(frames - 1) * S + S - 1];
  if (S > 1) log_p = log_add(log_p, alpha[(frames - 1) * S + S - 2]);
  if (log_p == kNegInf) {
    // zero mass from -inf entries: not a length problem, the loss is simply
    // infinite and no alignment mass exists to assign gradient to
    result.loss = std::numeric_limits<double>::infinity();
    return result;
  }
  result.loss = -log_p;

  // beta excludes the emission at its own frame, so alpha*beta is the full
  // mass through (t, s)
  beta[(frames - 1) * S + S - 1] = 0.0;
  if (S > 1) beta[(frames - 1) * S + S - 2] = 0.0;
  for (size_t t = frames - 1; t-- > 0;) {
    for (size_t s = 0; s < S; ++s) {
      double acc = beta[(t + 1) * S + s] + lp(t + 1, label(s));
      if (s + 1 < S)
        acc = log_add(acc, beta[(t + 1) * S + s + 1] + lp(t + 1, label(s + 1)));
      if (s + 2 < S && label(s + 2) != kBlank && label(s + 2) != label(s))
        acc = log_add(acc, beta[(t + 1) * S + s + 2] + lp(t + 1, label(s + 2)));
      beta[t * S + s] = acc;
    }
  }

  for (size_t t = 0; t < frames; ++t) {
    std::vector<double> by_token(vocab, kNegInf);
    for (size_t s = 0; s < S; ++s) {
      double mass = alpha[t * S + s] + beta[t * S + s];
      int v = label(s);
      by_token[v] = log_add(by_token[v], mass);
    }
    for (size_t v = 0; v < vocab; ++v)
      if (by_token[v] != kNegInf)
        result.grad[t * vocab + v] = -std::exp(by_token[v] - log_p);
  }
  return result;
}

CtcResult ctc_loss(const posterior::PosteriorMatrix& p,
                   const std::vector<int>& target) {
  if (auto row = p.first_unnormalized_row())
    throw std::invalid_argument("posterior row " + std::to_string(*row) +
                                " is not normalized");
  return ctc_loss(p.log_values(), p.frames(), p.vocab(), target);
}

Hypothesis greedy_decode(const posterior::PosteriorMatrix& p) {
  Hypothesis hyp;
  std::vector<int> path(p.frames());
  for (std::uint32_t t = 0; t < p.frames(); ++t) {
    int best = 0;
    for (std::uint32_t v = 1; v < p.vocab(); ++v)
      if (p.at(t, v) > p.at(t, best)) best = static_cast<int>(v);
    path[t] = best;
    hyp.log_score += p.at(t, best);
  }
  hyp.tokens = collapse(path);
  return hyp;
}

namespace {

// blank-ending / non-blank-ending mass of one collapsed prefix
struct PrefixMass {
  double pb = kNegInf;
  double pnb = kNegInf;
  double total() const { return log_add(pb, pnb); }
};

bool prefix_before(const std::vector<int>& a, double sa,
                   const std::vector<int>& b, double sb) {
  if (sa != sb) return sa > sb;
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

}  // namespace

NBestList prefix_beam_search(const posterior::PosteriorMatrix& p,
                             size_t beam_width, size_t k) {
  if (k < 1 || beam_width < k)
    throw std::invalid_argument("need beam_width >= k >= 1");

  std::map<std::vector<int>, PrefixMass> beam;
  beam[{}] = PrefixMass{0.0, kNegInf};  // empty prefix, certain before frame 0

  for (std::uint32_t t = 0; t < p.frames(); ++t) {
    std::map<std::vector<int>, PrefixMass> next;
    for (const auto& [prefix, mass] : beam) {
      const double total = mass.total();
      for (std::uint32_t v = 0; v < p.vocab(); ++v) {
        const double lpv = p.at(t, v);
        if (lpv == kNegInf) continue;
        if (static_cast<int>(v) == kBlank) {
          auto& m = next[prefix];
          m.pb = log_add(m.pb, total + lpv);
        } else if (!prefix.empty() && prefix.back() == static_cast<int>(v)) {
          // same symbol: staying inside the last run vs starting a new one
          auto& same = next[prefix];
          same.pnb = log_add(same.pnb, mass.pnb + lpv);
          std::vector<int> ext = prefix;
          ext.push_back(static_cast<int>(v));
          auto& m = next[ext];
          m.pnb = log_add(m.pnb, mass.pb + lpv);
        } else {
          std::vector<int> ext = prefix;
          ext.push_back(static_cast<int>(v));
          auto& m = next[ext];
          m.pnb = log_add(m.pnb, total + lpv);
        }
      }
    }
    if (next.size() > beam_width) {
      std::vector<std::pair<const std::vector<int>*, double>> order;
      order.reserve(next.size());
      for (const auto& [prefix, mass] : next)
        order.emplace_back(&prefix, mass.total());
      std::nth_element(order.begin(), order.begin() + beam_width - 1,
                       order.end(), [](const auto& a, const auto& b) {
                         return prefix_before(*a.first, a.second, *b.first,
                                              b.second);
                       });
      std::map<std::vector<int>, PrefixMass> pruned;
      for (size_t i = 0; i < beam_width; ++i)
        pruned.emplace(*order[i].first, next[*order[i].first]);
      next = std::move(pruned);
    }
    beam = std::move(next);
  }

  std::vector<std::pair<std::vector<int>, double>> ranked;
  for (const auto& [prefix, mass] : beam) {
    double total = mass.total();
    if (total == kNegInf) continue;
    ranked.emplace_back(prefix, total);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return prefix_before(a.first, a.second, b.first, b.second);
  });

  NBestList out;
  for (const auto& [tokens, score] : ranked) {
    if (out.items.size() == k) break;
    out.items.push_back(Hypothesis{tokens, std::min(score, 0.0)});
  }
  return out;
}

}  // namespace pindec::ctc
