#include "repfactor/covariance.hpp"

#include <algorithm>

namespace repfactor {

ReprMatrix center_columns(const ReprMatrix& m) {
  ReprMatrix out = m;
  out.values = center_columns(m.values);
  return out;
}

CovarianceSlice<double> cross_covariance(const ReprMatrix& z, const ReprMatrix& y, const CovarianceOptions& opts) {
  CovarianceSlice<double> s;
  if (opts.center) {
    s = cross_covariance(center_columns(z.values), center_columns(y.values), opts.normalize, opts.strict);
  } else {
    s = cross_covariance(z.values, y.values, opts.normalize, opts.strict);
  }
  s.group_id = z.group_id;
  return s;
}

std::vector<std::string> groups_with_cell(const AnalysisSet& set, int layer, const std::string& category) {
  std::vector<std::string> out;
  for (const auto& g : set.groups)
    if (set.find({g, layer, category})) out.push_back(g);
  return out;
}

std::vector<CovarianceSlice<double>> build_slices(const AnalysisSet& set, int layer, const std::string& category,
                                                  const CovarianceOptions& opts,
                                                  const std::vector<std::string>& groups) {
  std::vector<std::string> selection = groups;
  if (selection.empty()) selection = set.groups;
  else {
    // keep manifest order regardless of the caller's order
    std::vector<std::string> ordered;
    for (const auto& g : set.groups)
      if (std::find(selection.begin(), selection.end(), g) != selection.end()) ordered.push_back(g);
    if (ordered.size() != selection.size())
      throw Error(ErrorCode::MissingEntry, "selection names a group not in the manifest");
    selection = std::move(ordered);
  }

  std::vector<CovarianceSlice<double>> slices;
  slices.reserve(selection.size());
  for (const auto& g : selection) {
    const EntryPair* e = set.find({g, layer, category});
    if (!e)
      throw Error(ErrorCode::MissingEntry,
                  "group " + g + " has no entry for layer " + std::to_string(layer) + ", category " + category);
    ReprMatrix y = read_matrix(e->experimental.path);
    ReprMatrix z = read_matrix(e->control.path);
    z.group_id = g;
    CovarianceSlice<double> s = cross_covariance(z, y, opts);
    check_finite(s.omega, "covariance slice for " + g);
    slices.push_back(std::move(s));
  }
  return slices;
}

}  // namespace repfactor
