#pragma once

// On-disk model layout (one directory per decomposition):
//   V.rfm, H.rfm, Q_<i>.rfm, sigma_<i>.rfm (k x 1), model.json

#include <filesystem>
#include <string>
#include <vector>

#include "repfactor/parafac2.hpp"

namespace repfactor {

struct StoredModel {
  Parafac2Model<double> model;
  std::vector<std::string> groups;
  int layer = 0;
  std::string category;
  SolverOptions options;
};

void save_model(const StoredModel& stored, const std::filesystem::path& dir);
StoredModel load_model(const std::filesystem::path& dir);

}  // namespace repfactor
