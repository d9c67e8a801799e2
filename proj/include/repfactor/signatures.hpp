#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "repfactor/manifest.hpp"
#include "repfactor/parafac2.hpp"

namespace repfactor {

/// diag(Sigma_l) of one group together with its mean ("condensed" intensity).
struct Signature {
  std::string group_id;
  int layer = 0;
  std::string category;
  Vector<double> values;
  double condensed = 0.0;

  CellKey key() const { return {group_id, layer, category}; }
};

struct Provenance {
  Index rank = 0;
  double fit = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Arithmetic mean with compensated summation. `absolute` averages |v|.
double condense(const Vector<double>& values, bool absolute = false);
double condense(const Signature& sig, bool absolute = false);

Signature extract_signature(const Parafac2Model<double>& model, std::size_t group_index, const CellKey& labels,
                            bool absolute = false);

class SignatureTable {
 public:
  void insert(Signature sig, std::optional<Provenance> provenance = std::nullopt);

  const Signature* find(const CellKey& key) const;
  const std::map<CellKey, Signature>& cells() const { return cells_; }
  const std::map<CellKey, Provenance>& provenance() const { return provenance_; }
  std::size_t size() const { return cells_.size(); }

  // Axis labels in first-insertion order (layers sorted).
  const std::vector<std::string>& groups() const { return groups_; }
  std::vector<int> layers() const;
  const std::vector<std::string>& categories() const { return categories_; }

  /// All signatures of one (layer, category), in group order.
  std::vector<Signature> slice(int layer, const std::string& category) const;

  /// (layer, condensed) pairs of one group in one category, ascending layer.
  std::vector<std::pair<int, double>> condensed_series(const std::string& group, const std::string& category) const;

 private:
  std::map<CellKey, Signature> cells_;
  std::map<CellKey, Provenance> provenance_;
  std::vector<std::string> groups_;
  std::vector<int> layers_;
  std::vector<std::string> categories_;
};

struct DecompositionRun {
  std::vector<std::string> groups;  // group label per model slice index
  int layer = 0;
  std::string category;
  Parafac2Model<double> model;
};

SignatureTable build_table(const std::vector<DecompositionRun>& runs, bool absolute = false);

/// CSV: group,layer,category,condensed,v1..vk with 17 significant digits.
void write_signature_csv(const SignatureTable& table, std::ostream& out);
SignatureTable read_signature_csv(std::istream& in);

/// Formats with 17 significant digits (round-trips any double).
std::string format_exact(double x);

}  // namespace repfactor
