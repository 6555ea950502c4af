#include "cape/simgen.hpp"

#include <Eigen/Eigenvalues>
#include <fstream>
#include <stdexcept>

namespace cape {

namespace {

// Matrix square root via eigendecomposition; tolerates exactly singular
// (even zero) PSD inputs, unlike a Cholesky factor.
Eigen::Matrix3d psd_sqrt(const Eigen::Matrix3d& cov, const char* what) {
  Eigen::Matrix3d sym = (cov + cov.transpose()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(sym);
  if (eig.info() != Eigen::Success)
    throw std::invalid_argument(std::string(what) + ": eigensolve failed");
  Eigen::Vector3d vals = eig.eigenvalues();
  const double scale = std::max(1.0, vals.cwiseAbs().maxCoeff());
  for (int i = 0; i < 3; ++i) {
    if (vals(i) < -1e-10 * scale)
      throw std::invalid_argument(std::string(what) + ": matrix is not PSD");
    vals(i) = std::sqrt(std::max(vals(i), 0.0));
  }
  return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

std::string asset_id(int j) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "A%04d", j + 1);
  return buf;
}

std::string day_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "D%05d", i + 1);
  return buf;
}

}  // namespace

void FactorModelParams::validate() const {
  psd_sqrt(cov_b, "FactorModelParams.cov_b");
  psd_sqrt(cov_f, "FactorModelParams.cov_f");
  if (sigma_gamma_shape <= 0.0 || sigma_gamma_scale <= 0.0)
    throw std::invalid_argument("FactorModelParams: gamma parameters must be > 0");
}

FactorModelParams default_params() {
  FactorModelParams p;
  p.mu_b << 0.78282, 0.51803, 0.41003;
  p.cov_b << 0.029145, 0.023873, 0.010184,
             0.023873, 0.053951, -0.006967,
             0.010184, -0.006967, 0.086856;
  p.mu_f << 0.023558, 0.012989, 0.020714;
  p.cov_f << 1.2507, -0.034999, -0.20419,
             -0.034999, 0.31564, -0.0022526,
             -0.20419, -0.0022526, 0.19303;
  p.sigma_gamma_shape = 3.3586;
  p.sigma_gamma_scale = 0.1876;
  return p;
}

SimulatedUniverse build_universe(int p, const FactorModelParams& params,
                                 std::uint64_t seed) {
  if (p < 1) throw std::invalid_argument("build_universe: need p >= 1");
  params.validate();
  const Eigen::Matrix3d L = psd_sqrt(params.cov_b, "build_universe");

  SimulatedUniverse uni;
  uni.seed = seed;
  uni.loadings.resize(p, 3);
  uni.idio_std.resize(p);

  StreamRng load_rng(seed, 0, StreamRng::kLoadings);
  for (int i = 0; i < p; ++i) {
    Eigen::Vector3d z(load_rng.normal(), load_rng.normal(), load_rng.normal());
    uni.loadings.row(i) = (params.mu_b + L * z).transpose();
  }
  StreamRng sd_rng(seed, 0, StreamRng::kIdioStd);
  for (int i = 0; i < p; ++i)
    uni.idio_std(i) =
        sd_rng.gamma(params.sigma_gamma_shape, params.sigma_gamma_scale);
  return uni;
}

ReturnPanel generate_panel(const SimulatedUniverse& universe, int n_days,
                           const FactorModelParams& params,
                           std::uint64_t seed) {
  if (n_days < 1) throw std::invalid_argument("generate_panel: need n_days >= 1");
  const int p = static_cast<int>(universe.loadings.rows());
  const Eigen::Matrix3d L = psd_sqrt(params.cov_f, "generate_panel");

  ReturnPanel panel;
  panel.returns.resize(n_days, p);
  panel.dates.reserve(n_days);
  panel.assets.reserve(p);
  for (int j = 0; j < p; ++j) panel.assets.push_back(asset_id(j));

  StreamRng f_rng(universe.seed, seed, StreamRng::kFactors);
  StreamRng e_rng(universe.seed, seed, StreamRng::kIdioNoise);
  for (int i = 0; i < n_days; ++i) {
    panel.dates.push_back(day_id(i));
    Eigen::Vector3d z(f_rng.normal(), f_rng.normal(), f_rng.normal());
    Eigen::Vector3d f = params.mu_f + L * z;
    Eigen::VectorXd row = universe.loadings * f;
    for (int j = 0; j < p; ++j)
      row(j) += universe.idio_std(j) * e_rng.normal();
    panel.returns.row(i) = row.transpose();
  }
  return panel;
}

Eigen::VectorXd population_mean(const SimulatedUniverse& universe,
                                const FactorModelParams& params) {
  return universe.loadings * params.mu_f;
}

Eigen::MatrixXd population_covariance(const SimulatedUniverse& universe,
                                      const FactorModelParams& params) {
  Eigen::MatrixXd cov =
      universe.loadings * params.cov_f * universe.loadings.transpose();
  cov += universe.idio_std.array().square().matrix().asDiagonal();
  return ((cov + cov.transpose()) / 2.0).eval();
}

void save_universe_csv(const SimulatedUniverse& universe,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write universe CSV: " + path);
  out << "asset,b1,b2,b3,sigma\n";
  out.precision(12);
  for (int i = 0; i < universe.loadings.rows(); ++i) {
    out << asset_id(i) << ',' << universe.loadings(i, 0) << ','
        << universe.loadings(i, 1) << ',' << universe.loadings(i, 2) << ','
        << universe.idio_std(i) << '\n';
  }
}

}  // namespace cape
