#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "repfactor/covariance.hpp"
#include "repfactor/types.hpp"

namespace repfactor {

struct PlantOptions {
  std::size_t groups = 5;
  Index slice_rows = 30;  // d_l for every group
  Index cols = 40;        // d
  Index rank = 5;
  std::uint64_t seed = 1;
  double sigma_min = 1.0;
  double sigma_max = 10.0;
  // Per-slice signal-to-noise ratio in dB; noiseless when unset.
  std::optional<double> snr_db;
};

/// Ground-truth PARAFAC2 factors and the slices built from them:
/// Omega_l = Q_l H diag(sigma_l) V^T (+ noise).
struct PlantedProblem {
  std::vector<Matrix<double>> q;
  Matrix<double> h;
  Matrix<double> v;
  std::vector<Vector<double>> sigma;
  std::vector<CovarianceSlice<double>> slices;
};

PlantedProblem plant_parafac2(const PlantOptions& opts);

struct SyntheticDatasetOptions {
  std::uint64_t seed = 7;
  int layers = 8;
  Index rows = 96;  // data points per matrix
  Index experimental_dim = 12;
  Index latent_rank = 4;
};

/// Writes a small experiment/control dataset: RFM1 matrices for three
/// families of two groups each over `layers` layers and the categories
/// ALL, Number and Tense (group c2 has no Tense data), token/lemma corpora,
/// external scores, `manifest.json` and a ready-to-run `config.json`.
void write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticDatasetOptions& opts = {});

}  // namespace repfactor
