#include "repfactor/signatures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>

#include "repfactor/csv.hpp"

namespace repfactor {

std::string format_exact(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double condense(const Vector<double>& values, bool absolute) {
  if (values.size() == 0) throw Error(ErrorCode::EmptyVector, "cannot condense an empty signature");
  // Neumaier summation
  double sum = 0.0;
  double carry = 0.0;
  for (Index i = 0; i < values.size(); ++i) {
    const double v = absolute ? std::abs(values(i)) : values(i);
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) carry += (sum - t) + v;
    else carry += (v - t) + sum;
    sum = t;
  }
  return (sum + carry) / static_cast<double>(values.size());
}

double condense(const Signature& sig, bool absolute) { return condense(sig.values, absolute); }

Signature extract_signature(const Parafac2Model<double>& model, std::size_t group_index, const CellKey& labels,
                            bool absolute) {
  if (group_index >= model.sigma.size())
    throw Error(ErrorCode::IndexOutOfRange,
                "group index " + std::to_string(group_index) + " of " + std::to_string(model.sigma.size()));
  Signature s;
  s.group_id = labels.group;
  s.layer = labels.layer;
  s.category = labels.category;
  s.values = model.sigma[group_index];
  s.condensed = condense(s.values, absolute);
  return s;
}

void SignatureTable::insert(Signature sig, std::optional<Provenance> provenance) {
  const CellKey key = sig.key();
  if (cells_.count(key))
    throw Error(ErrorCode::DuplicateCell,
                "(" + key.group + ", " + std::to_string(key.layer) + ", " + key.category + ")");
  if (std::find(groups_.begin(), groups_.end(), key.group) == groups_.end()) groups_.push_back(key.group);
  if (std::find(layers_.begin(), layers_.end(), key.layer) == layers_.end()) layers_.push_back(key.layer);
  if (std::find(categories_.begin(), categories_.end(), key.category) == categories_.end())
    categories_.push_back(key.category);
  if (provenance) provenance_.emplace(key, *provenance);
  cells_.emplace(key, std::move(sig));
}

const Signature* SignatureTable::find(const CellKey& key) const {
  auto it = cells_.find(key);
  return it == cells_.end() ? nullptr : &it->second;
}

std::vector<int> SignatureTable::layers() const {
  std::vector<int> out = layers_;
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Signature> SignatureTable::slice(int layer, const std::string& category) const {
  std::vector<Signature> out;
  for (const auto& g : groups_)
    if (const Signature* s = find({g, layer, category})) out.push_back(*s);
  return out;
}

std::vector<std::pair<int, double>> SignatureTable::condensed_series(const std::string& group,
                                                                     const std::string& category) const {
  std::vector<std::pair<int, double>> out;
  for (int layer : layers())
    if (const Signature* s = find({group, layer, category})) out.emplace_back(layer, s->condensed);
  return out;
}

SignatureTable build_table(const std::vector<DecompositionRun>& runs, bool absolute) {
  SignatureTable table;
  for (const auto& run : runs) {
    if (run.groups.size() != run.model.groups())
      throw Error(ErrorCode::ShapeMismatch, "run labels " + std::to_string(run.groups.size()) + " groups, model has " +
                                                std::to_string(run.model.groups()));
    const Provenance prov{run.model.rank, run.model.fit, run.model.iterations, run.model.converged};
    for (std::size_t l = 0; l < run.groups.size(); ++l)
      table.insert(extract_signature(run.model, l, {run.groups[l], run.layer, run.category}, absolute), prov);
  }
  return table;
}

void write_signature_csv(const SignatureTable& table, std::ostream& out) {
  Index k = 0;
  for (const auto& [key, sig] : table.cells()) k = std::max(k, sig.values.size());

  out << "group,layer,category,condensed";
  for (Index i = 1; i <= k; ++i) out << ",v" << i;
  out << '\n';
  for (const auto& [key, sig] : table.cells()) {
    out << csv::escape(key.group) << ',' << key.layer << ',' << csv::escape(key.category) << ','
        << format_exact(sig.condensed);
    for (Index i = 0; i < k; ++i) {
      out << ',';
      if (i < sig.values.size()) out << format_exact(sig.values(i));
    }
    out << '\n';
  }
}

SignatureTable read_signature_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "signature CSV is empty");
  const auto header = csv::split(line);
  if (header.size() < 4 || header[0] != "group" || header[1] != "layer" || header[2] != "category" ||
      header[3] != "condensed")
    throw Error(ErrorCode::ParseError, "signature CSV header must start with group,layer,category,condensed");

  SignatureTable table;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != header.size())
      throw Error(ErrorCode::ParseError, "signature CSV line " + std::to_string(lineno) + ": wrong field count");
    Signature s;
    try {
      s.group_id = f[0];
      s.layer = std::stoi(f[1]);
      s.category = f[2];
      s.condensed = std::stod(f[3]);
      std::vector<double> vals;
      for (std::size_t i = 4; i < f.size() && !f[i].empty(); ++i) vals.push_back(std::stod(f[i]));
      s.values = Eigen::Map<const Vector<double>>(vals.data(), static_cast<Index>(vals.size()));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::ParseError, "signature CSV line " + std::to_string(lineno) + ": bad number");
    }
    table.insert(std::move(s));
  }
  return table;
}

}  // namespace repfactor
