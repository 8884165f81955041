#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "spca/covariance.hpp"
#include "spca/csv.hpp"
#include "spca/metrics.hpp"
#include "spca/seeding.hpp"
#include "spca/simulation.hpp"

namespace spca {

/// One simulated dataset from a spiked model, summarized over a range of support sizes.
struct DeviationConfig {
  Index n = 1000;
  Index p = 6;
  Index theta_sparsity = 2;
  double sigma1 = 4.0;
  double sigma2 = 1.0;
  double delta = 1.0;
  std::uint64_t seed = 0;
  std::vector<Index> s_values;
  std::optional<double> t;  // defaults to log(e p)
  ThetaMode theta_mode = ThetaMode::flat;
  EnumerationBudget budget;

  double confidence() const { return t.value_or(1.0 + std::log(static_cast<double>(p))); }
};

/**
 * Measured sparse deviation against its theoretical envelope. z_values holds Z(s) over
 * exactly-s supports, z_upto its running maximum over the listed s, scale the population
 * sigma_max(s), and ratio = z / (scale * bound).
 */
struct DeviationProfile {
  std::vector<Index> s_values;
  std::vector<double> z_values;
  std::vector<double> z_upto;
  std::vector<double> bound_values;
  std::vector<double> scale;
  std::vector<double> ratio;
  double t = 0.0;
};

inline DeviationProfile deviation_profile(const SymmetricMatrix& sigma_hat, const SymmetricMatrix& sigma_true,
                                          Index n, double delta, const std::vector<Index>& s_values, double t,
                                          const EnumerationBudget& budget = {}) {
  const Index p = sigma_true.dim();
  for (Index s : s_values)
    detail::require(s >= 1 && s <= p, ErrorCode::invalid_argument,
                    "support size " + std::to_string(s) + " outside [1, " + std::to_string(p) + "]");
  DeviationProfile out;
  out.t = t;
  double running = 0.0;
  for (Index s : s_values) {
    const double z = sparse_deviation(sigma_hat, sigma_true, s, budget);
    const double zeta = zeta_bound(s, p, t, delta, n);
    const double smax = sparse_max_eigenvalue(sigma_true, s, budget);
    running = std::max(running, z);
    out.s_values.push_back(s);
    out.z_values.push_back(z);
    out.z_upto.push_back(running);
    out.bound_values.push_back(zeta);
    out.scale.push_back(smax);
    out.ratio.push_back(smax > 0.0 ? z / (smax * zeta) : 0.0);
  }
  return out;
}

/// Simulates one masked sample (seed streams data and mask) and profiles its debiased
/// covariance against the population matrix.
inline DeviationProfile deviation_profile(const DeviationConfig& config) {
  detail::require(!config.s_values.empty(), ErrorCode::invalid_argument, "empty support-size range");
  for (Index s : config.s_values)
    detail::require(s >= 1 && s <= config.p, ErrorCode::invalid_argument,
                    "support size " + std::to_string(s) + " outside [1, " + std::to_string(config.p) + "]");
  for (Index s : config.s_values)
    detail::require(binomial(config.p, s) <= config.budget.max_evaluations, ErrorCode::budget_exceeded,
                    "C(" + std::to_string(config.p) + ", " + std::to_string(s) +
                        ") supports exceed the enumeration budget");
  const SpikedModel model(make_sparse_theta(config.p, config.theta_sparsity, config.theta_mode,
                                            derive_seed(config.seed, 0, 0, Stream::theta)),
                          config.sigma1, config.sigma2);
  const auto sigma = build_spiked(model);
  const auto x = sample_gaussian(sigma, config.n, derive_seed(config.seed, 0, 0, Stream::data));
  const auto sample = apply_mask(x, config.delta, derive_seed(config.seed, 0, 0, Stream::mask));
  const auto sigma_tilde = debias_covariance(empirical_covariance(sample), config.delta);
  return deviation_profile(sigma_tilde, sigma, config.n, config.delta, config.s_values, config.confidence(),
                           config.budget);
}

/// Columns: s, z, zeta, sigma_max, ratio, z_upto.
inline void write_profile_csv(std::ostream& out, const DeviationProfile& profile) {
  using detail::format_double;
  out << "s,z,zeta,sigma_max,ratio,z_upto\n";
  for (std::size_t i = 0; i < profile.s_values.size(); ++i)
    out << profile.s_values[i] << ',' << format_double(profile.z_values[i]) << ','
        << format_double(profile.bound_values[i]) << ',' << format_double(profile.scale[i]) << ','
        << format_double(profile.ratio[i]) << ',' << format_double(profile.z_upto[i]) << '\n';
}

}  // namespace spca
