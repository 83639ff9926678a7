#pragma once

// Reference implementations used only by tests. Everything here is written
// straight from the definitions, deliberately avoiding the library's code
// paths, so that agreement between the two is evidence of correctness.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "fewshot/episode_sampler.hpp"
#include "fewshot/metric_classifier.hpp"

namespace fewshot::oracle {

/// y = W x + b by explicit triple loop over a dense row-major matrix.
inline std::vector<double> matvec(const std::vector<double>& w, const std::vector<double>& b,
                                  std::size_t out_dim, std::size_t in_dim,
                                  const std::vector<double>& x) {
  std::vector<double> y(out_dim, 0.0);
  for (std::size_t r = 0; r < out_dim; ++r) {
    long double acc = b.empty() ? 0.0L : b[r];
    for (std::size_t c = 0; c < in_dim; ++c) acc += static_cast<long double>(w[r * in_dim + c]) * x[c];
    y[r] = static_cast<double>(acc);
  }
  return y;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  long double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<long double>(a[i]) * b[i];
    aa += static_cast<long double>(a[i]) * a[i];
    bb += static_cast<long double>(b[i]) * b[i];
  }
  return static_cast<double>(ab / std::sqrt(aa * bb));
}

/// Index of the prototype with largest cosine to the query; strict '>' keeps
/// the first of equal candidates.
inline std::uint32_t nearest_cosine(const std::vector<double>& query,
                                    const std::vector<std::vector<double>>& prototypes) {
  std::uint32_t best = 0;
  double best_cos = cosine(query, prototypes[0]);
  for (std::uint32_t n = 1; n < prototypes.size(); ++n) {
    const double c = cosine(query, prototypes[n]);
    if (c > best_cos) {
      best = n;
      best_cos = c;
    }
  }
  return best;
}

inline std::vector<double> to_double(const std::vector<float>& v) {
  return std::vector<double>(v.begin(), v.end());
}

/// Prototypical cross-entropy for an episode, computed from scratch given
/// raw head parameters (so finite differences can perturb them freely).
inline double episode_loss(const Episode& ep, const std::vector<double>& w,
                           const std::vector<double>& b, std::size_t out_dim, std::size_t in_dim,
                           double tau) {
  const std::size_t n_way = ep.n_way();
  std::vector<std::vector<double>> protos(n_way, std::vector<double>(out_dim, 0.0));
  std::vector<double> counts(n_way, 0.0);
  for (const auto& s : ep.support) {
    const auto z = matvec(w, b, out_dim, in_dim, to_double(s.record->vector));
    for (std::size_t i = 0; i < out_dim; ++i) protos[s.slot][i] += z[i];
    counts[s.slot] += 1.0;
  }
  for (std::size_t n = 0; n < n_way; ++n) {
    for (double& v : protos[n]) v /= counts[n];
  }
  long double total = 0.0L;
  for (const auto& q : ep.query) {
    const auto z = matvec(w, b, out_dim, in_dim, to_double(q.record->vector));
    std::vector<long double> s(n_way);
    for (std::size_t n = 0; n < n_way; ++n) s[n] = cosine(z, protos[n]) / tau;
    long double denom = 0.0L;
    for (auto v : s) denom += std::exp(v);
    total += -(s[q.slot] - std::log(denom));
  }
  return static_cast<double>(total / static_cast<long double>(ep.query.size()));
}

/// Central finite differences of oracle::episode_loss over every weight (and
/// bias) entry; returns weights followed by bias.
inline std::vector<double> finite_difference_gradient(const Episode& ep, const ProjectionHead& head,
                                                      double tau, double step) {
  std::vector<double> w(head.weights().begin(), head.weights().end());
  std::vector<double> b(head.bias().begin(), head.bias().end());
  std::vector<double> grad;
  auto probe = [&](std::vector<double>& params) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double keep = params[i];
      params[i] = keep + step;
      const double up = episode_loss(ep, w, b, head.out_dim(), head.in_dim(), tau);
      params[i] = keep - step;
      const double down = episode_loss(ep, w, b, head.out_dim(), head.in_dim(), tau);
      params[i] = keep;
      grad.push_back((up - down) / (2.0 * step));
    }
  };
  probe(w);
  probe(b);
  return grad;
}

/// Balanced accuracy by explicit per-class recount.
template <typename Pairs>
double balanced_accuracy(const Pairs& truth_pred) {
  std::map<std::uint32_t, std::pair<double, double>> per;
  for (const auto& [t, p] : truth_pred) {
    per[t].second += 1.0;
    if (t == p) per[t].first += 1.0;
  }
  double sum = 0.0;
  for (const auto& [label, cp] : per) sum += cp.first / cp.second;
  return sum / static_cast<double>(per.size());
}

}  // namespace fewshot::oracle
