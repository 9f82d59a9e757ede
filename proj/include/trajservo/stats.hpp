#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include <boost/math/distributions/students_t.hpp>

#include "trajservo/error.hpp"

namespace trajservo {

struct GroupStats {
  double mean = 0.0;
  double std = 0.0;   // sample standard deviation, n-1
  double ci95 = 0.0;  // half-width
  int n = 0;
};

inline GroupStats summarize(std::span<const double> values) {
  if (values.size() < 2) throw Error(ErrorCode::InsufficientSamples, "need at least two samples");
  const auto n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  const double t = boost::math::quantile(dist, 0.975);
  return {mean, sd, t * sd / std::sqrt(n), static_cast<int>(values.size())};
}

/// Two-sided Welch unequal-variance t-test p-value.
inline double welch_p_value(std::span<const double> a, std::span<const double> b) {
  const GroupStats sa = summarize(a);
  const GroupStats sb = summarize(b);
  const double va = sa.std * sa.std / sa.n;
  const double vb = sb.std * sb.std / sb.n;
  const double se2 = va + vb;
  if (se2 == 0.0) return sa.mean == sb.mean ? 1.0 : 0.0;
  const double t = (sa.mean - sb.mean) / std::sqrt(se2);
  const double dof = se2 * se2 / (va * va / (sa.n - 1) + vb * vb / (sb.n - 1));
  const boost::math::students_t dist(dof);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

}  // namespace trajservo
