#pragma once

#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Dense>

namespace cfaso {

// Network-wide constants. Defaults reproduce the reference simulation setup:
// a 500 m square with 15 four-antenna APs serving 7 single-antenna users.
struct ScenarioConfig {
  int num_users = 7;                    // K
  int num_aps = 15;                     // L
  int antennas_per_ap = 4;              // N
  double area_side = 500.0;             // m
  double fixed_ap_power = 5.0;          // W, consumed by any active AP
  double pa_inefficiency = 2.0;         // scales radiated power to consumed power
  double max_tx_power = 1.0;            // W, per-AP radiated budget
  double dl_noise_power = 3.9810717055349694e-13;  // W (-94 dBm)
  double ul_noise_power = 3.9810717055349694e-13;  // W (-94 dBm)
  double shadow_std = 4.0;              // dB, log-normal shadow fading
  double bandwidth = 20.0e6;            // Hz
  double pathloss_intercept = -35.4;    // dB at 1 m
  double pathloss_exponent_coeff = -24.0;  // dB per decade of distance
  double angular_spread = 15.0;         // deg, local scattering ASD
  int num_channel_realizations = 500;
  std::uint64_t rng_seed = 1;

  // Throws std::invalid_argument when any field is out of its domain.
  void validate() const;
};

// Parses a flat key=value text file ('#' comments, blank lines allowed).
// Keys are the ScenarioConfig field names; unknown or duplicate keys are an
// error, missing keys keep their defaults.
ScenarioConfig load_config(const std::string& path);
ScenarioConfig parse_config(const std::string& text);

// One random drop of AP/user positions and the derived large-scale state.
struct NetworkGeometry {
  Eigen::MatrixXd ap_positions;    // L x 2, uniform over the square
  Eigen::MatrixXd user_positions;  // K x 2
  Eigen::MatrixXd distances;       // L x K, clamped below at 1 m
  Eigen::MatrixXd beta;            // L x K, linear-scale large-scale fading
  Eigen::MatrixXd angles;          // L x K, AP->user azimuth in radians
};

// Samples positions and shadow fading from `rng`, then fills in distances,
// path gains, and angles. Consumes a fixed number of draws per drop so that
// the same (config, rng state) always yields the same geometry.
NetworkGeometry generate_geometry(const ScenarioConfig& config, std::mt19937_64& rng);

}  // namespace cfaso
