#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <random>

#include "cfaso/channel.hpp"
#include "cfaso/rng.hpp"

using namespace cfaso;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("covariance of a single antenna is the path gain itself") {
  Eigen::MatrixXcd R = local_scattering_covariance(0.37, 1.1, 15.0, 1);
  REQUIRE(R.rows() == 1);
  CHECK(R(0, 0).real() == doctest::Approx(0.37));
  CHECK(R(0, 0).imag() == doctest::Approx(0.0));
}

TEST_CASE("zero angular spread collapses to a rank-one array response") {
  const double beta = 2.0, phi = 0.3;
  Eigen::MatrixXcd R = local_scattering_covariance(beta, phi, 0.0, 4);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(R);
  REQUIRE(es.info() == Eigen::Success);
  CHECK(es.eigenvalues()(3) == doctest::Approx(4.0 * beta).epsilon(1e-10));
  for (int i = 0; i < 3; ++i) CHECK(std::abs(es.eigenvalues()(i)) < 1e-10);
  // every entry has magnitude beta and the phase progression of the array
  for (int m = 0; m < 4; ++m)
    for (int n = 0; n < 4; ++n) {
      CHECK(std::abs(R(m, n)) == doctest::Approx(beta).epsilon(1e-12));
      const double expect = kPi * (m - n) * std::sin(phi);
      CHECK(std::arg(R(m, n) * std::exp(std::complex<double>(0.0, -expect))) ==
            doctest::Approx(0.0).epsilon(1e-9));
    }
}

TEST_CASE("scattering covariance is Hermitian with trace N*beta and near-PSD") {
  Eigen::MatrixXcd R = local_scattering_covariance(1.0, 0.3, 15.0, 4);
  CHECK((R - R.adjoint()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(R.trace().real() == doctest::Approx(4.0).epsilon(1e-12));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(R);
  CHECK(es.eigenvalues().minCoeff() > -1e-10);
  CHECK_THROWS(local_scattering_covariance(-1.0, 0.0, 15.0, 4));
  CHECK_THROWS(local_scattering_covariance(1.0, std::nan(""), 15.0, 4));
  CHECK_THROWS(local_scattering_covariance(1.0, 0.0, 15.0, 0));
}

TEST_CASE("channel samples reproduce the covariance they were drawn from") {
  Eigen::MatrixXcd A(2, 2);
  A << std::complex<double>(1.0, 0.0), std::complex<double>(0.4, 0.2),
      std::complex<double>(0.1, -0.3), std::complex<double>(0.8, 0.0);
  Eigen::MatrixXcd R = A * A.adjoint();  // generic PSD target
  std::mt19937_64 rng(11);
  const int T = 100000;
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(2, 2);
  Eigen::VectorXcd mean = Eigen::VectorXcd::Zero(2);
  for (int t = 0; t < T; ++t) {
    Eigen::VectorXcd h = sample_channel(R, rng);
    acc += h * h.adjoint();
    mean += h;
  }
  acc /= static_cast<double>(T);
  mean /= static_cast<double>(T);
  CHECK((acc - R).norm() / R.norm() < 0.03);
  CHECK(mean.norm() < 0.02);
}

TEST_CASE("zero covariance gives the zero channel") {
  std::mt19937_64 rng(3);
  Eigen::VectorXcd h = sample_channel(Eigen::MatrixXcd::Zero(3, 3), rng);
  CHECK(h.norm() == 0.0);
}

TEST_CASE("same seed, same channel draw") {
  Eigen::MatrixXcd R = local_scattering_covariance(1.0, 0.5, 15.0, 4);
  std::mt19937_64 a(7), b(7);
  CHECK(sample_channel(R, a) == sample_channel(R, b));
}

TEST_CASE("scalar estimate shrinks the observation by the channel-to-noise ratio") {
  Eigen::MatrixXcd R(1, 1);
  R(0, 0) = 1.0;
  Eigen::VectorXcd y(1);
  y(0) = 2.0;
  Eigen::VectorXcd hhat = mmse_estimate(R, y, 1.0);
  CHECK(hhat(0).real() == doctest::Approx(1.0));
  CHECK(hhat(0).imag() == doctest::Approx(0.0));
}

TEST_CASE("noiseless pilots with a full-rank prior return the observation") {
  Eigen::MatrixXcd R = local_scattering_covariance(1.0, 0.2, 25.0, 3);
  R.diagonal().array() += 0.1;  // safely full rank
  std::mt19937_64 rng(9);
  Eigen::VectorXcd y = standard_complex_normal(3, rng);
  Eigen::VectorXcd hhat = mmse_estimate(R, y, 0.0);
  CHECK((hhat - y).norm() < 1e-10);
}

TEST_CASE("zero prior estimates zero; noiseless rank-deficient prior is degenerate") {
  Eigen::VectorXcd y(2);
  y(0) = 1.0;
  y(1) = 2.0;
  CHECK(mmse_estimate(Eigen::MatrixXcd::Zero(2, 2), y, 1.0).norm() == 0.0);
  Eigen::MatrixXcd rank1 = local_scattering_covariance(1.0, 0.1, 0.0, 2);
  CHECK_THROWS_AS(mmse_estimate(rank1, y, 0.0), std::runtime_error);
}

TEST_CASE("beamformer is the unit-norm estimate direction") {
  Eigen::VectorXcd hhat(2);
  hhat(0) = std::complex<double>(3.0, 0.0);
  hhat(1) = std::complex<double>(0.0, 4.0);
  Eigen::VectorXcd wv = mr_beamformer(hhat);
  CHECK(wv.norm() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK((wv * 5.0 - hhat).norm() < 1e-12);
  CHECK_THROWS_AS(mr_beamformer(Eigen::VectorXcd::Zero(2)), std::runtime_error);
}

namespace {

ScenarioConfig small_config(int L, int K, int N, int T, double ul_noise) {
  ScenarioConfig cfg;
  cfg.num_aps = L;
  cfg.num_users = K;
  cfg.antennas_per_ap = N;
  cfg.num_channel_realizations = T;
  cfg.ul_noise_power = ul_noise;
  return cfg;
}

CovarianceGrid synthetic_grid(int L, int K, int N, std::uint64_t seed) {
  CovarianceGrid cov;
  cov.num_aps = L;
  cov.num_users = K;
  cov.num_antennas = N;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> beta(0.5, 2.0), angle(-kPi, kPi);
  for (int l = 0; l < L; ++l)
    for (int k = 0; k < K; ++k)
      cov.R.push_back(local_scattering_covariance(beta(rng), angle(rng), 15.0, N));
  return cov;
}

}  // namespace

TEST_CASE("single-antenna gain matches the Rayleigh mean") {
  // With one antenna and noiseless pilots the beamformer is h/|h|, so the
  // average effective gain is E|h| = sqrt(pi*beta/4).
  const double beta = 0.63;
  CovarianceGrid cov;
  cov.num_aps = 1;
  cov.num_users = 1;
  cov.num_antennas = 1;
  cov.R.push_back(Eigen::MatrixXcd::Constant(1, 1, beta));
  ScenarioConfig cfg = small_config(1, 1, 1, 100000, 0.0);
  ChannelStatistics stats = estimate_statistics(cov, cfg, 77);
  const double expect = std::sqrt(kPi * beta / 4.0);
  CHECK(stats.b(0, 0) == doctest::Approx(expect).epsilon(0.02));
  // second moment is exactly E|h|^2 = beta here
  CHECK(stats.Cki(0, 0)(0, 0).real() == doctest::Approx(beta).epsilon(0.02));
}

TEST_CASE("estimated statistics satisfy the moment inequalities") {
  CovarianceGrid cov = synthetic_grid(3, 2, 2, 5);
  ScenarioConfig cfg = small_config(3, 2, 2, 2000, 0.1);
  ChannelStatistics stats = estimate_statistics(cov, cfg, 123);
  stats.validate();
  CHECK((stats.b.array() >= 0.0).all());
  for (int k = 0; k < 2; ++k) {
    for (int i = 0; i < 2; ++i) {
      const Eigen::MatrixXcd& C = stats.Cki(k, i);
      CHECK((C - C.adjoint()).cwiseAbs().maxCoeff() < 1e-12 * C.cwiseAbs().maxCoeff());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(C);
      CHECK(es.eigenvalues().minCoeff() > -1e-12 * C.trace().real());
    }
    // mean-square of the aligned link dominates the squared mean
    for (int l = 0; l < 3; ++l)
      CHECK(stats.Cki(k, k)(l, l).real() + 1e-12 >= stats.b(l, k) * stats.b(l, k));
  }
  // the real square-root factor reproduces the quadratic form exactly
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i) {
      Eigen::VectorXd rho(3);
      for (int l = 0; l < 3; ++l) rho(l) = unif(rng);
      const double via_factor = (stats.Cki_sqrt(k, i) * rho).squaredNorm();
      const double direct = rho.dot(stats.Cki(k, i).real() * rho);
      CHECK(via_factor == doctest::Approx(direct).epsilon(1e-9));
    }
}

TEST_CASE("statistics estimation is reproducible from the seed") {
  CovarianceGrid cov = synthetic_grid(2, 2, 2, 8);
  ScenarioConfig cfg = small_config(2, 2, 2, 200, 0.05);
  ChannelStatistics a = estimate_statistics(cov, cfg, 55);
  ChannelStatistics b = estimate_statistics(cov, cfg, 55);
  CHECK(a.b == b.b);
  for (std::size_t i = 0; i < a.C.size(); ++i) CHECK(a.C[i] == b.C[i]);
  ChannelStatistics c = estimate_statistics(cov, cfg, 56);
  CHECK(a.b != c.b);
}

TEST_CASE("an unobservable link trips the redraw cap") {
  CovarianceGrid cov;
  cov.num_aps = 1;
  cov.num_users = 1;
  cov.num_antennas = 2;
  cov.R.push_back(Eigen::MatrixXcd::Zero(2, 2));  // estimate is always zero
  ScenarioConfig cfg = small_config(1, 1, 2, 10, 0.1);
  CHECK_THROWS_AS(estimate_statistics(cov, cfg, 1), std::runtime_error);
}

TEST_CASE("restriction keeps the selected rows and blocks") {
  CovarianceGrid cov = synthetic_grid(4, 2, 2, 9);
  ScenarioConfig cfg = small_config(4, 2, 2, 300, 0.05);
  ChannelStatistics full = estimate_statistics(cov, cfg, 31);

  SUBCASE("identity restriction changes nothing") {
    ChannelStatistics same = restrict_statistics(full, ActiveSet::full(4));
    CHECK(same.b == full.b);
    for (std::size_t i = 0; i < full.C.size(); ++i) CHECK(same.C[i] == full.C[i]);
    CHECK(same.ap_indices == full.ap_indices);
  }
  SUBCASE("subset keeps rows in ascending order") {
    ActiveSet keep{0, 2, 3};
    ChannelStatistics sub = restrict_statistics(full, keep);
    CHECK(sub.num_aps == 3);
    CHECK(sub.ap_indices == std::vector<int>{0, 2, 3});
    CHECK(sub.b(1, 0) == full.b(2, 0));
    CHECK(sub.Cki(0, 1)(1, 2) == full.Cki(0, 1)(2, 3));
  }
  SUBCASE("restrictions compose") {
    ChannelStatistics sub = restrict_statistics(full, ActiveSet{0, 2, 3});
    ChannelStatistics subsub = restrict_statistics(sub, ActiveSet{1, 2});  // rows of sub
    ChannelStatistics direct = restrict_statistics(full, ActiveSet{2, 3});
    CHECK(subsub.b == direct.b);
    CHECK(subsub.ap_indices == direct.ap_indices);
    for (std::size_t i = 0; i < direct.C.size(); ++i) CHECK(subsub.C[i] == direct.C[i]);
  }
  SUBCASE("empty restriction is rejected") {
    CHECK_THROWS(restrict_statistics(full, ActiveSet{}));
  }
}

TEST_CASE("statistics survive a serialization round trip") {
  CovarianceGrid cov = synthetic_grid(3, 2, 2, 12);
  ScenarioConfig cfg = small_config(3, 2, 2, 150, 0.02);
  ChannelStatistics stats = estimate_statistics(cov, cfg, 99);
  const std::string path = "stats_roundtrip.bin";
  save_statistics(stats, path);
  ChannelStatistics back = load_statistics(path);
  CHECK(back.num_aps == stats.num_aps);
  CHECK(back.num_users == stats.num_users);
  CHECK(back.num_realizations == stats.num_realizations);
  CHECK(back.dl_noise_power == stats.dl_noise_power);
  CHECK(back.b == stats.b);
  for (std::size_t i = 0; i < stats.C.size(); ++i) {
    CHECK(back.C[i] == stats.C[i]);
    CHECK(back.C_sqrt[i].isApprox(stats.C_sqrt[i], 1e-12));
  }
  CHECK(back.psd_shift == stats.psd_shift);
  std::remove(path.c_str());
  CHECK_THROWS(load_statistics("no_such_file.bin"));
}
