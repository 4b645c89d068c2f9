#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfaso/active_set.hpp"
#include "cfaso/scenario.hpp"

namespace cfaso {

// Spatial covariance of the channel between one N-antenna AP and one user
// under a Gaussian local scattering model with half-wavelength ULA spacing:
//   [R]_{m,n} = beta * exp(j*pi*(m-n)*sin(phi)) * exp(-asd^2/2 * (pi*(m-n)*cos(phi))^2)
// with phi the nominal azimuth (radians) and asd the angular standard
// deviation (degrees, converted internally). asd = 0 collapses to the
// rank-one line-of-sight array response.
Eigen::MatrixXcd local_scattering_covariance(double beta, double angle_rad, double asd_deg,
                                             int num_antennas);

// Draws h ~ CN(0, R) through the Hermitian square root of R; negative
// eigenvalues from roundoff are clipped to zero.
Eigen::VectorXcd sample_channel(const Eigen::MatrixXcd& R, std::mt19937_64& rng);

// MMSE estimate from the noisy pilot observation y = h + n, n ~ CN(0, sigma2*I):
//   hhat = R (R + sigma2*I)^{-1} y.
// sigma2 = 0 requires full-rank R (the estimate degenerates otherwise).
Eigen::VectorXcd mmse_estimate(const Eigen::MatrixXcd& R, const Eigen::VectorXcd& y,
                               double sigma2_ul);

// Maximum-ratio beamformer: the unit-norm estimate direction. Rejects a
// zero-norm estimate.
Eigen::VectorXcd mr_beamformer(const Eigen::VectorXcd& hhat);

// All AP-user covariances of one drop.
struct CovarianceGrid {
  int num_aps = 0;
  int num_users = 0;
  int num_antennas = 0;
  std::vector<Eigen::MatrixXcd> R;  // R[l * num_users + k], each N x N

  const Eigen::MatrixXcd& at(int l, int k) const { return R[static_cast<std::size_t>(l) * num_users + k]; }
};

CovarianceGrid build_covariances(const ScenarioConfig& config, const NetworkGeometry& geometry);

// First- and second-order statistics of the effective downlink channels under
// maximum-ratio precoding, estimated by Monte Carlo over channel and pilot
// noise realizations:
//   b(l,k)        = E[ Re( h_{lk}^H w_{lk} ) ]            (clamped at 0)
//   C[k,i](l,m)   = E[ (h_{lk}^H w_{li}) (h_{mk}^H w_{mi})^* ]
struct ChannelStatistics {
  int num_aps = 0;           // rows of b / dimension of each C block
  int num_users = 0;
  int num_realizations = 0;
  double dl_noise_power = 0.0;
  std::vector<int> ap_indices;            // global AP ids of the rows
  Eigen::MatrixXd b;                      // L x K
  std::vector<Eigen::MatrixXcd> C;        // K*K blocks of L x L, index k*K+i
  std::vector<Eigen::MatrixXd> C_sqrt;    // PSD square roots of Re(C[k,i])
  Eigen::MatrixXd psd_shift;              // K x K relative eigenvalue clip per block

  const Eigen::MatrixXcd& Cki(int k, int i) const {
    return C[static_cast<std::size_t>(k) * num_users + i];
  }
  const Eigen::MatrixXd& Cki_sqrt(int k, int i) const {
    return C_sqrt[static_cast<std::size_t>(k) * num_users + i];
  }
  void validate() const;  // shape and PSD/Jensen sanity, throws on violation
};

// Estimates the statistics from `config.num_channel_realizations` seeded
// realizations. Every (AP, user, realization) triple derives its own RNG
// stream from `seed`, so results are independent of evaluation order and of
// which APs are later selected. A realization whose MMSE estimate has exactly
// zero norm is redrawn (at most 100 times, then an error is raised).
ChannelStatistics estimate_statistics(const CovarianceGrid& cov, const ScenarioConfig& config,
                                      std::uint64_t seed);

// Keeps only the rows/columns of the given APs (indices into the current row
// set of `stats`, ascending order preserved). Square-root factors are
// recomputed on the restricted blocks.
ChannelStatistics restrict_statistics(const ChannelStatistics& stats, const ActiveSet& active);

// Binary serialization so expensive Monte Carlo estimates can be cached.
void save_statistics(const ChannelStatistics& stats, const std::string& path);
ChannelStatistics load_statistics(const std::string& path);

}  // namespace cfaso
