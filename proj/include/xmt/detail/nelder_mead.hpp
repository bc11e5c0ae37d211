#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace xmt {

template <class F>
NelderMeadResult nelder_mead(F&& f, std::vector<double> x0, const std::vector<double>& steps, int max_iterations,
                             double tolerance) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> pts(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += steps[i];
  std::vector<double> val(n + 1);
  for (std::size_t i = 0; i <= n; ++i) val[i] = f(pts[i]);

  std::vector<std::size_t> order(n + 1);
  NelderMeadResult out;
  auto point = [&](const std::vector<double>& centre, const std::vector<double>& worst, double t) {
    std::vector<double> p(n);
    for (std::size_t k = 0; k < n; ++k) p[k] = centre[k] + t * (worst[k] - centre[k]);
    return p;
  };

  int it = 0;
  for (; it < max_iterations; ++it) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return val[i] < val[j]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];

    double spread = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        spread = std::max(spread, std::abs(pts[i][k] - pts[best][k]) / std::max(std::abs(steps[k]), 1e-300));
      }
    }
    if (std::abs(val[worst] - val[best]) <= tolerance * (std::abs(val[best]) + 1e-12) && spread < 1e-3) {
      out.converged = true;
      break;
    }

    std::vector<double> centre(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t k = 0; k < n; ++k) centre[k] += pts[i][k] / static_cast<double>(n);
    }
    auto reflected = point(centre, pts[worst], -1.0);
    const double fr = f(reflected);
    if (fr < val[best]) {
      auto expanded = point(centre, pts[worst], -2.0);
      const double fe = f(expanded);
      if (fe < fr) {
        pts[worst] = std::move(expanded);
        val[worst] = fe;
      } else {
        pts[worst] = std::move(reflected);
        val[worst] = fr;
      }
      continue;
    }
    if (fr < val[second]) {
      pts[worst] = std::move(reflected);
      val[worst] = fr;
      continue;
    }
    const bool outside = fr < val[worst];
    auto contracted = point(centre, outside ? reflected : pts[worst], 0.5);
    const double fc = f(contracted);
    if (fc < (outside ? fr : val[worst])) {
      pts[worst] = std::move(contracted);
      val[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t k = 0; k < n; ++k) pts[i][k] = pts[best][k] + 0.5 * (pts[i][k] - pts[best][k]);
      val[i] = f(pts[i]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(val.begin(), val.end()) - val.begin());
  out.x = pts[best];
  out.value = val[best];
  out.iterations = it;
  return out;
}

}  // namespace xmt
