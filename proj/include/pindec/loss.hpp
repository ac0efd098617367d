#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

namespace pindec::loss {

struct LossBreakdown {
  double l_ctc_char = 0.0;
  double l_ce_char = 0.0;
  double l_ctc_py = 0.0;
  double l_ce_py = 0.0;
  double l_char = 0.0;   // lambda_ctc * l_ctc_char + (1 - lambda_ctc) * l_ce_char
  double l_py = 0.0;     // lambda_ctc * l_ctc_py   + (1 - lambda_ctc) * l_ce_py
  double l_total = 0.0;  // alpha * l_char + (1 - alpha) * l_py
  double lambda_ctc = 0.0;
  double alpha = 0.0;
};

struct CeResult {
  double loss = 0.0;               // mean over positions of -log softmax[target]
  std::vector<double> grad;        // rows x vocab, d loss / d logit
};

CeResult cross_entropy(const std::vector<double>& logits, size_t rows,
                       size_t vocab, const std::vector<int>& targets);

LossBreakdown combine(double lambda_ctc, double alpha, double l_ctc_char,
                      double l_ce_char, double l_ctc_py, double l_ce_py);

// loss_fn returns (loss, analytic gradient) at a point. Central differences
// with step eps are compared componentwise; the relative error denominator
// is max(|analytic|, |numeric|, 1e-8).
using GradFn =
    std::function<std::pair<double, std::vector<double>>(const std::vector<double>&)>;

double finite_diff_check(const GradFn& loss_fn, const std::vector<double>& point,
                         double eps);

}  // namespace pindec::loss
