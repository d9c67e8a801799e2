#include "repfactor/phylo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "repfactor/csv.hpp"
#include "repfactor/error.hpp"

namespace repfactor {

int DistanceMatrix::index_of(const std::string& label) const {
  auto it = std::find(labels.begin(), labels.end(), label);
  return it == labels.end() ? -1 : static_cast<int>(it - labels.begin());
}

std::vector<std::string> PhyloTree::leaves(int node) const {
  std::vector<std::string> out;
  std::vector<int> stack{node};
  while (!stack.empty()) {
    const Node& n = nodes.at(static_cast<std::size_t>(stack.back()));
    stack.pop_back();
    if (n.is_leaf()) {
      out.push_back(n.label);
    } else {
      stack.push_back(n.right);
      stack.push_back(n.left);
    }
  }
  return out;
}

DistanceMatrix cosine_distance_matrix(const std::vector<std::string>& labels,
                                      const std::vector<Vector<double>>& vectors) {
  if (labels.size() != vectors.size()) throw Error(ErrorCode::LengthMismatch, "labels and vectors differ in count");
  if (vectors.size() < 2) throw Error(ErrorCode::TooFewPoints, "distance matrix needs at least 2 signatures");
  const Index k = vectors.front().size();
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != k)
      throw Error(ErrorCode::LengthMismatch, labels[i] + " has length " + std::to_string(vectors[i].size()));
    if (vectors[i].squaredNorm() == 0.0) throw Error(ErrorCode::ZeroVector, labels[i]);
  }

  const auto n = static_cast<Index>(vectors.size());
  DistanceMatrix out{labels, Matrix<double>::Zero(n, n)};
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const auto& a = vectors[static_cast<std::size_t>(i)];
      const auto& b = vectors[static_cast<std::size_t>(j)];
      const double cos = a.dot(b) / (a.norm() * b.norm());
      out.d(i, j) = out.d(j, i) = std::clamp(1.0 - cos, 0.0, 2.0);
    }
  }
  return out;
}

DistanceMatrix cosine_distance_matrix(const std::vector<Signature>& signatures) {
  std::vector<std::string> labels;
  std::vector<Vector<double>> vectors;
  for (const auto& s : signatures) {
    labels.push_back(s.group_id);
    vectors.push_back(s.values);
  }
  return cosine_distance_matrix(labels, vectors);
}

DistanceMatrix average_distance(const std::vector<DistanceMatrix>& matrices,
                                const std::vector<std::string>& all_groups) {
  if (matrices.empty()) throw Error(ErrorCode::TooFewPoints, "no distance matrices to average");
  const auto n = static_cast<Index>(all_groups.size());

  std::vector<std::vector<int>> position;  // per matrix: all_groups index -> local index
  for (const auto& m : matrices) {
    for (const auto& l : m.labels)
      if (std::find(all_groups.begin(), all_groups.end(), l) == all_groups.end())
        throw Error(ErrorCode::UnknownLabel, l);
    std::vector<int> pos;
    for (const auto& g : all_groups) pos.push_back(m.index_of(g));
    position.push_back(std::move(pos));
  }

  DistanceMatrix out{all_groups, Matrix<double>::Zero(n, n)};
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      double sum = 0.0;
      for (std::size_t m = 0; m < matrices.size(); ++m) {
        const int a = position[m][static_cast<std::size_t>(i)];
        const int b = position[m][static_cast<std::size_t>(j)];
        sum += (a < 0 || b < 0) ? 1.0 : matrices[m].d(a, b);
      }
      out.d(i, j) = out.d(j, i) = sum / static_cast<double>(matrices.size());
    }
  }
  return out;
}

PhyloTree upgma(const DistanceMatrix& dm) {
  const std::size_t n = dm.size();
  if (n < 2) throw Error(ErrorCode::TooFewPoints, "UPGMA needs at least 2 leaves");
  if (dm.d.rows() != static_cast<Index>(n) || dm.d.cols() != static_cast<Index>(n))
    throw Error(ErrorCode::ShapeMismatch, "distance matrix shape does not match its labels");

  struct Cluster {
    int node;
    std::size_t size;
    std::string key;  // smallest leaf label
  };

  PhyloTree tree;
  std::vector<Cluster> active;
  for (std::size_t i = 0; i < n; ++i) {
    tree.nodes.push_back({dm.labels[i], 0.0, -1, -1});
    active.push_back({static_cast<int>(i), 1, dm.labels[i]});
  }
  Matrix<double> dist = dm.d;

  while (active.size() > 1) {
    std::size_t bi = 0, bj = 1;
    double best = std::numeric_limits<double>::infinity();
    std::pair<std::string, std::string> best_key;
    for (std::size_t i = 0; i < active.size(); ++i) {
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        const double v = dist(static_cast<Index>(i), static_cast<Index>(j));
        const std::pair<std::string, std::string> key = std::minmax(active[i].key, active[j].key);
        if (v < best || (v == best && key < best_key)) {
          best = v;
          best_key = key;
          bi = i;
          bj = j;
        }
      }
    }

    const Cluster& a = active[bi];
    const Cluster& b = active[bj];
    const bool a_first = a.key < b.key;
    PhyloTree::Node merged;
    merged.height = best / 2.0;
    merged.left = a_first ? a.node : b.node;
    merged.right = a_first ? b.node : a.node;
    tree.nodes.push_back(merged);
    Cluster joined{static_cast<int>(tree.nodes.size() - 1), a.size + b.size, std::min(a.key, b.key)};

    // Size-weighted mean distance from the new cluster to every other one.
    const auto m = static_cast<Index>(active.size());
    Vector<double> row(m);
    for (Index c = 0; c < m; ++c) {
      row(c) = (static_cast<double>(a.size) * dist(static_cast<Index>(bi), c) +
                static_cast<double>(b.size) * dist(static_cast<Index>(bj), c)) /
               static_cast<double>(joined.size);
    }
    dist.row(static_cast<Index>(bi)) = row.transpose();
    dist.col(static_cast<Index>(bi)) = row;
    dist(static_cast<Index>(bi), static_cast<Index>(bi)) = 0.0;
    active[bi] = joined;

    // drop bj
    std::vector<Index> keep;
    for (Index c = 0; c < m; ++c)
      if (c != static_cast<Index>(bj)) keep.push_back(c);
    dist = dist(keep, keep).eval();
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
  }
  tree.root = active.front().node;
  return tree;
}

namespace {

std::string newick_label(const std::string& label) {
  if (label.find_first_of(" \t()[]':;,") == std::string::npos) return label;
  std::string out = "'";
  for (char c : label) {
    if (c == '\'') out += '\'';
    out += c;
  }
  return out + "'";
}

std::string format_length(double x, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, x);
  return buf;
}

std::string smallest_leaf(const PhyloTree& t, int node) {
  const auto l = t.leaves(node);
  return *std::min_element(l.begin(), l.end());
}

void emit(const PhyloTree& t, int node, int precision, std::string& out) {
  const auto& n = t.nodes[static_cast<std::size_t>(node)];
  if (n.is_leaf()) {
    out += newick_label(n.label);
    return;
  }
  int first = n.left, second = n.right;
  if (smallest_leaf(t, second) < smallest_leaf(t, first)) std::swap(first, second);
  out += '(';
  for (int child : {first, second}) {
    if (child == second) out += ',';
    emit(t, child, precision, out);
    out += ':';
    out += format_length(n.height - t.nodes[static_cast<std::size_t>(child)].height, precision);
  }
  out += ')';
}

}  // namespace

std::string to_newick(const PhyloTree& tree, int precision) {
  if (tree.root < 0) throw Error(ErrorCode::Usage, "empty tree");
  std::string out;
  emit(tree, tree.root, precision, out);
  return out + ";";
}

void write_distance_csv(const DistanceMatrix& d, std::ostream& out) {
  out << "group";
  for (const auto& l : d.labels) out << ',' << csv::escape(l);
  out << '\n';
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << csv::escape(d.labels[i]);
    for (std::size_t j = 0; j < d.size(); ++j)
      out << ',' << format_exact(d.d(static_cast<Index>(i), static_cast<Index>(j)));
    out << '\n';
  }
}

}  // namespace repfactor
