#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "qg/graph.hpp"

namespace qg {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t worst_coord = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> params;
  double max_rel_err = 0.0;
  double step = 0.0;
  double tol = 0.0;

  bool pass() const { return max_rel_err <= tol; }
};

// Central-difference validation of analytic gradients.
//
// `loss` must be deterministic (dropout in eval mode or with fixed masks) and
// is called two ways: loss(true) rebuilds the graph, runs backward and leaves
// gradients in the params; loss(false) is forward-only. The relative error per
// coordinate is |g_a - g_n| / max(|g_a|, |g_n|, 1e-8).
inline GradCheckReport finite_difference_check(const std::vector<Param*>& params,
                                               const std::function<double(bool)>& loss,
                                               double step = 1e-5, double tol = 1e-4) {
  GradCheckReport report;
  report.step = step;
  report.tol = tol;

  for (Param* p : params) p->zero_grad();
  loss(true);
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Param* p : params) analytic.push_back(p->grad);

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Param& p = *params[pi];
    GradCheckEntry entry;
    entry.name = p.name;
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double saved = p.value.data[j];
      p.value.data[j] = saved + step;
      const double up = loss(false);
      p.value.data[j] = saved - step;
      const double down = loss(false);
      p.value.data[j] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double ga = analytic[pi].data[j];
      const double denom = std::max({std::fabs(ga), std::fabs(numeric), 1e-8});
      const double rel = std::fabs(ga - numeric) / denom;
      if (rel >= entry.max_rel_err) {
        entry.max_rel_err = rel;
        entry.worst_coord = j;
        entry.analytic_at_worst = ga;
        entry.numeric_at_worst = numeric;
      }
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.params.push_back(std::move(entry));
  }
  return report;
}

}  // namespace qg
