#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "spo/core/error.hpp"

namespace spo {

struct GradcheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_coordinate = 0;
  std::vector<double> numeric_gradient;
};

using LossEvaluator = std::function<double(std::span<const double>)>;

// Central differences per coordinate; error is |g_fd - g| / max(1, |g_fd|).
inline GradcheckResult gradcheck(const LossEvaluator& loss, std::span<const double> params,
                                 std::span<const double> gradient, double step) {
  require(step >= 1e-7 && step <= 1e-4, "gradcheck: step must lie in [1e-7, 1e-4]");
  require(params.size() == gradient.size(), "gradcheck: gradient length mismatch");
  GradcheckResult r;
  r.numeric_gradient.resize(params.size());
  std::vector<double> probe(params.begin(), params.end());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + step;
    const double up = loss(probe);
    probe[i] = saved - step;
    const double down = loss(probe);
    probe[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("gradcheck: non-finite loss at coordinate " + std::to_string(i));
    }
    const double fd = (up - down) / (2.0 * step);
    r.numeric_gradient[i] = fd;
    const double err = std::abs(fd - gradient[i]) / std::max(1.0, std::abs(fd));
    if (err > r.max_relative_error) {
      r.max_relative_error = err;
      r.worst_coordinate = i;
    }
  }
  return r;
}

}  // namespace spo
