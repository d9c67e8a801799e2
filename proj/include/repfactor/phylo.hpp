#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "repfactor/signatures.hpp"
#include "repfactor/types.hpp"

namespace repfactor {

/// Symmetric, zero-diagonal distances between labelled groups.
struct DistanceMatrix {
  std::vector<std::string> labels;
  Matrix<double> d;

  std::size_t size() const { return labels.size(); }
  /// Position of `label`, or -1.
  int index_of(const std::string& label) const;
};

/// Rooted binary ultrametric tree. Leaves have height 0; a child's branch
/// length is its parent's height minus its own.
struct PhyloTree {
  struct Node {
    std::string label;  // leaves only
    double height = 0.0;
    int left = -1;
    int right = -1;

    bool is_leaf() const { return left < 0; }
  };

  std::vector<Node> nodes;
  int root = -1;

  std::vector<std::string> leaves(int node) const;
  double root_height() const { return nodes.at(static_cast<std::size_t>(root)).height; }
};

/// d(i, j) = 1 - cos(v_i, v_j), clamped to [0, 2].
DistanceMatrix cosine_distance_matrix(const std::vector<Signature>& signatures);
DistanceMatrix cosine_distance_matrix(const std::vector<std::string>& labels, const std::vector<Vector<double>>& vectors);

/// Entry-wise mean over matrices; a matrix lacking either group of a pair
/// contributes distance 1 for that pair.
DistanceMatrix average_distance(const std::vector<DistanceMatrix>& matrices, const std::vector<std::string>& all_groups);

/// Average-linkage agglomerative clustering. Ties between equal distances
/// go to the lexicographically smallest pair of cluster labels (a cluster
/// is labelled by its smallest leaf).
PhyloTree upgma(const DistanceMatrix& d);

/// Newick with branch lengths at `precision` significant digits; children
/// ordered by smallest leaf label.
std::string to_newick(const PhyloTree& tree, int precision = 6);

/// Header row and column of labels, 17 significant digits.
void write_distance_csv(const DistanceMatrix& d, std::ostream& out);

}  // namespace repfactor
