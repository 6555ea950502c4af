#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>

#include "cape/panel.hpp"
#include "cape/rng.hpp"

namespace cape {

/// Three-factor return model: R_i = b_i'f + eps_i with b_i ~ N(mu_b, cov_b)
/// fixed per universe, f ~ N(mu_f, cov_f) per day, eps_i ~ N(0, sigma_i^2),
/// sigma_i ~ Gamma(shape, scale). "scale" is the scale parameter (mean =
/// shape * scale), not the rate.
struct FactorModelParams {
  Eigen::Vector3d mu_b;
  Eigen::Matrix3d cov_b;
  Eigen::Vector3d mu_f;
  Eigen::Matrix3d cov_f;
  double sigma_gamma_shape = 3.3586;
  double sigma_gamma_scale = 0.1876;

  void validate() const;
};

/// The standard simulation constants.
FactorModelParams default_params();

/// Loadings and idiosyncratic volatilities, fixed across replicates.
struct SimulatedUniverse {
  Eigen::MatrixXd loadings;  // p x 3
  Eigen::VectorXd idio_std;  // length p, > 0
  std::uint64_t seed = 0;
};

SimulatedUniverse build_universe(int p, const FactorModelParams& params,
                                 std::uint64_t seed);

/// One panel of n_days returns; deterministic given (universe, seed).
/// The seed here is the per-replicate panel seed, independent of the
/// universe seed.
ReturnPanel generate_panel(const SimulatedUniverse& universe, int n_days,
                           const FactorModelParams& params,
                           std::uint64_t seed);

/// Population moments implied by the model: mean B*mu_f and covariance
/// B*cov_f*B' + diag(sigma^2).
Eigen::VectorXd population_mean(const SimulatedUniverse& universe,
                                const FactorModelParams& params);
Eigen::MatrixXd population_covariance(const SimulatedUniverse& universe,
                                      const FactorModelParams& params);

/// CSV: asset,b1,b2,b3,sigma.
void save_universe_csv(const SimulatedUniverse& universe,
                       const std::string& path);

}  // namespace cape
