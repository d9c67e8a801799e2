#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "repfactor/matrix_io.hpp"
#include "repfactor/profile.hpp"

namespace repfactor {

struct CellKey {
  std::string group;
  int layer = 0;
  std::string category;

  auto operator<=>(const CellKey&) const = default;
};

struct MatrixRef {
  std::filesystem::path path;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
};

struct EntryPair {
  MatrixRef experimental;
  MatrixRef control;
};

/// Validated experiment/control dataset layout. Matrix payloads are not
/// loaded; only their headers have been checked.
struct AnalysisSet {
  std::filesystem::path source;
  std::vector<std::string> groups;
  std::vector<int> layers;
  std::vector<std::string> categories;
  std::map<CellKey, EntryPair> entries;
  // task -> (group -> score)
  std::map<std::string, std::map<std::string, double>> external_scores;
  std::map<std::string, LanguageProfile> profiles;
  // group -> token/lemma corpus to be profiled on demand
  std::map<std::string, std::filesystem::path> corpora;

  std::uint64_t experimental_dim() const;
  const EntryPair* find(const CellKey& key) const;
};

/// Relative matrix paths resolve against the manifest's directory.
AnalysisSet load_manifest(const std::filesystem::path& path);

}  // namespace repfactor
