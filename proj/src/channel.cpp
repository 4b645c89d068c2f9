#include "cfaso/channel.hpp"

#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "cfaso/rng.hpp"

namespace cfaso {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Hermitian square root with negative-eigenvalue clipping. `shift_out`, when
// given, receives the clipped mass relative to the trace.
Eigen::MatrixXcd hermitian_sqrt(const Eigen::MatrixXcd& M, double* shift_out = nullptr) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(M);
  if (es.info() != Eigen::Success) throw std::runtime_error("hermitian_sqrt: eigensolver failed");
  Eigen::VectorXd lam = es.eigenvalues();
  double clipped = 0.0, total = 0.0;
  for (int i = 0; i < lam.size(); ++i) {
    total += std::abs(lam(i));
    if (lam(i) < 0.0) {
      clipped += -lam(i);
      lam(i) = 0.0;
    }
  }
  if (shift_out) *shift_out = (total > 0.0) ? clipped / total : 0.0;
  return es.eigenvectors() * lam.cwiseSqrt().asDiagonal() * es.eigenvectors().adjoint();
}

Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  if (es.info() != Eigen::Success) throw std::runtime_error("symmetric_sqrt: eigensolver failed");
  Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

// Clips a Hermitian matrix onto the PSD cone; returns the relative clip size.
Eigen::MatrixXcd project_psd(const Eigen::MatrixXcd& M, double& rel_shift) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(M);
  if (es.info() != Eigen::Success) throw std::runtime_error("project_psd: eigensolver failed");
  Eigen::VectorXd lam = es.eigenvalues();
  double clipped = 0.0, total = 0.0;
  for (int i = 0; i < lam.size(); ++i) {
    total += std::abs(lam(i));
    if (lam(i) < 0.0) {
      clipped += -lam(i);
      lam(i) = 0.0;
    }
  }
  rel_shift = (total > 0.0) ? clipped / total : 0.0;
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
}

void check_finite(const Eigen::MatrixXcd& M, const char* what) {
  if (!M.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

// MMSE filter matrix Q so that hhat = Q * y.
Eigen::MatrixXcd mmse_filter(const Eigen::MatrixXcd& R, double sigma2_ul) {
  const int n = static_cast<int>(R.rows());
  if (sigma2_ul > 0.0) {
    Eigen::MatrixXcd A = R;
    A.diagonal().array() += sigma2_ul;
    return A.ldlt().solve(R).adjoint().eval();  // (A^{-1} R)^H = R A^{-1} for Hermitian A, R
  }
  // Noiseless pilot: the filter tends to the identity, but only when the
  // prior covariance keeps every direction observable.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(R);
  const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
  const double tol = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * std::max(lmax, 1.0);
  if (es.eigenvalues().minCoeff() <= tol)
    throw std::runtime_error("mmse_estimate: degenerate estimate (zero pilot noise with rank-deficient covariance)");
  return Eigen::MatrixXcd::Identity(n, n);
}

}  // namespace

Eigen::MatrixXcd local_scattering_covariance(double beta, double angle_rad, double asd_deg,
                                             int num_antennas) {
  if (!(std::isfinite(beta) && beta >= 0.0))
    throw std::invalid_argument("local_scattering_covariance: beta must be finite and >= 0");
  if (!std::isfinite(angle_rad))
    throw std::invalid_argument("local_scattering_covariance: angle must be finite");
  if (!(std::isfinite(asd_deg) && asd_deg >= 0.0))
    throw std::invalid_argument("local_scattering_covariance: asd must be finite and >= 0");
  if (num_antennas < 1)
    throw std::invalid_argument("local_scattering_covariance: need at least one antenna");

  const double asd_rad = asd_deg * kPi / 180.0;
  const double s = std::sin(angle_rad);
  const double c = std::cos(angle_rad);
  Eigen::MatrixXcd R(num_antennas, num_antennas);
  for (int m = 0; m < num_antennas; ++m) {
    for (int n = 0; n < num_antennas; ++n) {
      const double gap = kPi * static_cast<double>(m - n);  // 2*pi*spacing, spacing = 1/2
      const double phase = gap * s;
      const double damp = std::exp(-0.5 * asd_rad * asd_rad * gap * c * gap * c);
      R(m, n) = beta * damp * std::complex<double>(std::cos(phase), std::sin(phase));
    }
  }
  return R;
}

Eigen::VectorXcd sample_channel(const Eigen::MatrixXcd& R, std::mt19937_64& rng) {
  check_finite(R, "sample_channel");
  if (R.rows() != R.cols()) throw std::invalid_argument("sample_channel: covariance must be square");
  const Eigen::MatrixXcd root = hermitian_sqrt(R);
  return root * standard_complex_normal(static_cast<int>(R.rows()), rng);
}

Eigen::VectorXcd mmse_estimate(const Eigen::MatrixXcd& R, const Eigen::VectorXcd& y,
                               double sigma2_ul) {
  check_finite(R, "mmse_estimate");
  if (!y.allFinite()) throw std::invalid_argument("mmse_estimate: non-finite observation");
  if (R.rows() != R.cols() || R.rows() != y.size())
    throw std::invalid_argument("mmse_estimate: dimension mismatch");
  if (!(std::isfinite(sigma2_ul) && sigma2_ul >= 0.0))
    throw std::invalid_argument("mmse_estimate: pilot noise power must be >= 0");
  return mmse_filter(R, sigma2_ul) * y;
}

Eigen::VectorXcd mr_beamformer(const Eigen::VectorXcd& hhat) {
  if (!hhat.allFinite()) throw std::invalid_argument("mr_beamformer: non-finite estimate");
  const double n = hhat.norm();
  if (n == 0.0) throw std::runtime_error("mr_beamformer: zero-norm estimate");
  return hhat / n;
}

CovarianceGrid build_covariances(const ScenarioConfig& config, const NetworkGeometry& geometry) {
  config.validate();
  const int L = config.num_aps;
  const int K = config.num_users;
  if (geometry.beta.rows() != L || geometry.beta.cols() != K)
    throw std::invalid_argument("build_covariances: geometry does not match config");
  CovarianceGrid cov;
  cov.num_aps = L;
  cov.num_users = K;
  cov.num_antennas = config.antennas_per_ap;
  cov.R.reserve(static_cast<std::size_t>(L) * K);
  for (int l = 0; l < L; ++l)
    for (int k = 0; k < K; ++k)
      cov.R.push_back(local_scattering_covariance(geometry.beta(l, k), geometry.angles(l, k),
                                                  config.angular_spread, config.antennas_per_ap));
  return cov;
}

void ChannelStatistics::validate() const {
  const int L = num_aps, K = num_users;
  if (L < 1 || K < 1) throw std::invalid_argument("ChannelStatistics: empty dimensions");
  if (b.rows() != L || b.cols() != K) throw std::invalid_argument("ChannelStatistics: bad b shape");
  if (static_cast<int>(C.size()) != K * K || static_cast<int>(C_sqrt.size()) != K * K)
    throw std::invalid_argument("ChannelStatistics: bad block count");
  if (static_cast<int>(ap_indices.size()) != L)
    throw std::invalid_argument("ChannelStatistics: bad ap_indices");
  if (!(dl_noise_power > 0.0)) throw std::invalid_argument("ChannelStatistics: noise power must be positive");
  if ((b.array() < 0.0).any()) throw std::invalid_argument("ChannelStatistics: b must be nonnegative");
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < K; ++i) {
      const Eigen::MatrixXcd& M = Cki(k, i);
      if (M.rows() != L || M.cols() != L) throw std::invalid_argument("ChannelStatistics: bad C shape");
      const double scale = std::max(M.cwiseAbs().maxCoeff(), 1e-300);
      if ((M - M.adjoint()).cwiseAbs().maxCoeff() > 1e-9 * scale)
        throw std::invalid_argument("ChannelStatistics: C block not Hermitian");
    }
    // Second moment dominates squared first moment on every self-term.
    for (int l = 0; l < L; ++l) {
      const double second = Cki(k, k)(l, l).real();
      const double first2 = b(l, k) * b(l, k);
      if (second + 1e-12 * std::max(1.0, first2) < first2)
        throw std::invalid_argument("ChannelStatistics: mean-square below squared mean");
    }
  }
}

ChannelStatistics estimate_statistics(const CovarianceGrid& cov, const ScenarioConfig& config,
                                      std::uint64_t seed) {
  config.validate();
  const int L = cov.num_aps, K = cov.num_users, N = cov.num_antennas;
  if (L != config.num_aps || K != config.num_users || N != config.antennas_per_ap)
    throw std::invalid_argument("estimate_statistics: covariance grid does not match config");
  if (static_cast<int>(cov.R.size()) != L * K)
    throw std::invalid_argument("estimate_statistics: bad covariance grid");

  const int T = config.num_channel_realizations;
  const double sigma2_ul = config.ul_noise_power;
  const double sigma_ul = std::sqrt(sigma2_ul);

  std::vector<Eigen::MatrixXcd> root(cov.R.size()), filt(cov.R.size());
  for (std::size_t i = 0; i < cov.R.size(); ++i) {
    check_finite(cov.R[i], "estimate_statistics");
    root[i] = hermitian_sqrt(cov.R[i]);
    filt[i] = mmse_filter(cov.R[i], sigma2_ul);
  }

  Eigen::MatrixXd b_acc = Eigen::MatrixXd::Zero(L, K);
  std::vector<Eigen::MatrixXcd> c_acc(static_cast<std::size_t>(K) * K,
                                      Eigen::MatrixXcd::Zero(L, L));

  std::vector<Eigen::VectorXcd> h(static_cast<std::size_t>(L) * K);
  std::vector<Eigen::VectorXcd> w(static_cast<std::size_t>(L) * K);
  Eigen::MatrixXcd v(L, K);  // v(l, i) = h_{lk}^H w_{li} for the current user k

  for (int t = 0; t < T; ++t) {
    for (int l = 0; l < L; ++l) {
      for (int k = 0; k < K; ++k) {
        const std::size_t idx = static_cast<std::size_t>(l) * K + k;
        // Every (AP, user, realization) triple owns an RNG stream, so the
        // estimate is invariant to evaluation order and later AP selection.
        std::mt19937_64 rng(mix_seed(seed, idx, static_cast<std::uint64_t>(t)));
        int redraws = 0;
        for (;;) {
          const Eigen::VectorXcd hc = root[idx] * standard_complex_normal(N, rng);
          const Eigen::VectorXcd y = hc + sigma_ul * standard_complex_normal(N, rng);
          const Eigen::VectorXcd hhat = filt[idx] * y;
          const double norm = hhat.norm();
          if (norm > 0.0) {
            h[idx] = hc;
            w[idx] = hhat / norm;
            break;
          }
          if (++redraws > 100)
            throw std::runtime_error("estimate_statistics: zero-norm estimate persisted after 100 redraws");
        }
      }
    }
    for (int k = 0; k < K; ++k) {
      for (int l = 0; l < L; ++l) {
        const std::size_t row = static_cast<std::size_t>(l) * K;
        for (int i = 0; i < K; ++i) v(l, i) = h[row + k].dot(w[row + i]);
      }
      b_acc.col(k) += v.col(k).real();
      for (int i = 0; i < K; ++i)
        c_acc[static_cast<std::size_t>(k) * K + i] += v.col(i) * v.col(i).adjoint();
    }
  }

  ChannelStatistics stats;
  stats.num_aps = L;
  stats.num_users = K;
  stats.num_realizations = T;
  stats.dl_noise_power = config.dl_noise_power;
  stats.ap_indices.resize(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) stats.ap_indices[static_cast<std::size_t>(l)] = l;
  stats.b = (b_acc / static_cast<double>(T)).cwiseMax(0.0);
  stats.C.resize(static_cast<std::size_t>(K) * K);
  stats.C_sqrt.resize(static_cast<std::size_t>(K) * K);
  stats.psd_shift.resize(K, K);
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < K; ++i) {
      const std::size_t idx = static_cast<std::size_t>(k) * K + i;
      Eigen::MatrixXcd M = c_acc[idx] / static_cast<double>(T);
      M = 0.5 * (M + M.adjoint()).eval();
      double shift = 0.0;
      stats.C[idx] = project_psd(M, shift);
      stats.psd_shift(k, i) = shift;
      stats.C_sqrt[idx] = symmetric_sqrt(stats.C[idx].real());
    }
  }
  return stats;
}

ChannelStatistics restrict_statistics(const ChannelStatistics& stats, const ActiveSet& active) {
  active.validate(stats.num_aps);
  if (active.empty()) throw std::invalid_argument("restrict_statistics: empty active set");
  const int K = stats.num_users;
  const int n = active.size();

  ChannelStatistics out;
  out.num_aps = n;
  out.num_users = K;
  out.num_realizations = stats.num_realizations;
  out.dl_noise_power = stats.dl_noise_power;
  out.psd_shift = stats.psd_shift;
  out.ap_indices.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j)
    out.ap_indices[static_cast<std::size_t>(j)] =
        stats.ap_indices[static_cast<std::size_t>(active.aps[static_cast<std::size_t>(j)])];

  out.b.resize(n, K);
  for (int j = 0; j < n; ++j) out.b.row(j) = stats.b.row(active.aps[static_cast<std::size_t>(j)]);

  out.C.resize(static_cast<std::size_t>(K) * K);
  out.C_sqrt.resize(static_cast<std::size_t>(K) * K);
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < K; ++i) {
      const std::size_t idx = static_cast<std::size_t>(k) * K + i;
      Eigen::MatrixXcd sub(n, n);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
          sub(r, c) = stats.C[idx](active.aps[static_cast<std::size_t>(r)],
                                   active.aps[static_cast<std::size_t>(c)]);
      out.C[idx] = sub;
      out.C_sqrt[idx] = symmetric_sqrt(sub.real());
    }
  }
  return out;
}

namespace {

constexpr std::uint32_t kStatsMagic = 0x43465354u;  // "CFST"
constexpr std::uint32_t kStatsVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("load_statistics: truncated file");
  return v;
}

}  // namespace

void save_statistics(const ChannelStatistics& stats, const std::string& path) {
  stats.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_statistics: cannot open " + path);
  put(os, kStatsMagic);
  put(os, kStatsVersion);
  put(os, static_cast<std::int32_t>(stats.num_aps));
  put(os, static_cast<std::int32_t>(stats.num_users));
  put(os, static_cast<std::int32_t>(stats.num_realizations));
  put(os, stats.dl_noise_power);
  for (int id : stats.ap_indices) put(os, static_cast<std::int32_t>(id));
  for (int l = 0; l < stats.num_aps; ++l)
    for (int k = 0; k < stats.num_users; ++k) put(os, stats.b(l, k));
  for (const Eigen::MatrixXcd& M : stats.C)
    for (int r = 0; r < M.rows(); ++r)
      for (int c = 0; c < M.cols(); ++c) {
        put(os, M(r, c).real());
        put(os, M(r, c).imag());
      }
  for (int k = 0; k < stats.num_users; ++k)
    for (int i = 0; i < stats.num_users; ++i) put(os, stats.psd_shift(k, i));
  if (!os) throw std::runtime_error("save_statistics: write failed for " + path);
}

ChannelStatistics load_statistics(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_statistics: cannot open " + path);
  if (get<std::uint32_t>(is) != kStatsMagic) throw std::runtime_error("load_statistics: bad magic");
  if (get<std::uint32_t>(is) != kStatsVersion) throw std::runtime_error("load_statistics: bad version");

  ChannelStatistics stats;
  stats.num_aps = get<std::int32_t>(is);
  stats.num_users = get<std::int32_t>(is);
  stats.num_realizations = get<std::int32_t>(is);
  stats.dl_noise_power = get<double>(is);
  if (stats.num_aps < 1 || stats.num_users < 1 || stats.num_aps > (1 << 20) ||
      stats.num_users > (1 << 20))
    throw std::runtime_error("load_statistics: implausible dimensions");
  const int L = stats.num_aps, K = stats.num_users;
  stats.ap_indices.resize(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) stats.ap_indices[static_cast<std::size_t>(l)] = get<std::int32_t>(is);
  stats.b.resize(L, K);
  for (int l = 0; l < L; ++l)
    for (int k = 0; k < K; ++k) stats.b(l, k) = get<double>(is);
  stats.C.resize(static_cast<std::size_t>(K) * K);
  stats.C_sqrt.resize(static_cast<std::size_t>(K) * K);
  for (std::size_t idx = 0; idx < stats.C.size(); ++idx) {
    Eigen::MatrixXcd M(L, L);
    for (int r = 0; r < L; ++r)
      for (int c = 0; c < L; ++c) {
        const double re = get<double>(is);
        const double im = get<double>(is);
        M(r, c) = std::complex<double>(re, im);
      }
    stats.C[idx] = M;
    stats.C_sqrt[idx] = symmetric_sqrt(M.real());
  }
  stats.psd_shift.resize(K, K);
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < K; ++i) stats.psd_shift(k, i) = get<double>(is);
  stats.validate();
  return stats;
}

}  // namespace cfaso
