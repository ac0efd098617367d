#include "pindec/loss.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "pindec/util.hpp"

namespace pindec::loss {

CeResult cross_entropy(const std::vector<double>& logits, size_t rows,
                       size_t vocab, const std::vector<int>& targets) {
  if (logits.size() != rows * vocab)
    throw std::invalid_argument("logits shape mismatch");
  if (targets.size() != rows)
    throw std::invalid_argument("targets length " +
                                std::to_string(targets.size()) +
                                " does not match rows " + std::to_string(rows));
  for (int id : targets)
    if (id < 0 || static_cast<size_t>(id) >= vocab)
      throw std::invalid_argument("target id out of range");

  CeResult result;
  result.grad.assign(rows * vocab, 0.0);
  if (rows == 0) return result;

  const double inv_rows = 1.0 / static_cast<double>(rows);
  for (size_t r = 0; r < rows; ++r) {
    const double* row = logits.data() + r * vocab;
    double lse = util::logsumexp(row, row + vocab);
    result.loss += (lse - row[targets[r]]) * inv_rows;
    for (size_t v = 0; v < vocab; ++v) {
      double softmax = std::exp(row[v] - lse);
      result.grad[r * vocab + v] =
          (softmax - (static_cast<size_t>(targets[r]) == v ? 1.0 : 0.0)) *
          inv_rows;
    }
  }
  return result;
}

LossBreakdown combine(double lambda_ctc, double alpha, double l_ctc_char,
                      double l_ce_char, double l_ctc_py, double l_ce_py) {
  if (!(lambda_ctc >= 0.0 && lambda_ctc <= 1.0))
    throw std::invalid_argument("lambda_ctc out of [0,1]");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("alpha out of [0,1]");
  for (double v : {l_ctc_char, l_ce_char, l_ctc_py, l_ce_py})
    if (!std::isfinite(v))
      throw std::invalid_argument("loss components must be finite");

  LossBreakdown b;
  b.lambda_ctc = lambda_ctc;
  b.alpha = alpha;
  b.l_ctc_char = l_ctc_char;
  b.l_ce_char = l_ce_char;
  b.l_ctc_py = l_ctc_py;
  b.l_ce_py = l_ce_py;
  b.l_char = lambda_ctc * l_ctc_char + (1.0 - lambda_ctc) * l_ce_char;
  b.l_py = lambda_ctc * l_ctc_py + (1.0 - lambda_ctc) * l_ce_py;
  b.l_total = alpha * b.l_char + (1.0 - alpha) * b.l_py;
  return b;
}

double finite_diff_check(const GradFn& loss_fn, const std::vector<double>& point,
                         double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  auto [loss0, analytic] = loss_fn(point);
  if (!std::isfinite(loss0))
    throw std::runtime_error("non-finite loss at the probe point");
  if (analytic.size() != point.size())
    throw std::invalid_argument("gradient size mismatch");

  double max_rel = 0.0;
  std::vector<double> probe = point;
  for (size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + eps;
    double up = loss_fn(probe).first;
    probe[i] = point[i] - eps;
    double down = loss_fn(probe).first;
    probe[i] = point[i];
    if (!std::isfinite(up) || !std::isfinite(down))
      throw std::runtime_error("non-finite loss at perturbed component " +
                               std::to_string(i));
    double numeric = (up - down) / (2.0 * eps);
    double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-8});
    max_rel = std::max(max_rel, std::fabs(analytic[i] - numeric) / denom);
  }
  return max_rel;
}

}  // namespace pindec::loss
