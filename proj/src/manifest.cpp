#include "repfactor/manifest.hpp"

#include <fstream>
#include <set>

#include "json.hpp"
#include "repfactor/error.hpp"

namespace repfactor {
namespace {

using nlohmann::json;

MatrixRef check_matrix(const std::filesystem::path& base, const std::string& rel) {
  std::filesystem::path p = rel;
  if (p.is_relative()) p = base / p;
  try {
    const RfmHeader h = read_header(p);
    return {p, h.rows, h.cols};
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MissingFile) throw Error(ErrorCode::DanglingPath, p.string());
    throw;
  }
}

template <typename T>
T required(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw Error(ErrorCode::ParseError, where + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, where + ": bad '" + key + "': " + e.what());
  }
}

}  // namespace

std::uint64_t AnalysisSet::experimental_dim() const {
  return entries.empty() ? 0 : entries.begin()->second.experimental.cols;
}

const EntryPair* AnalysisSet::find(const CellKey& key) const {
  auto it = entries.find(key);
  return it == entries.end() ? nullptr : &it->second;
}

AnalysisSet load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::ParseError, path.string() + ": top level must be an object");

  const std::string where = path.string();
  const auto base = path.parent_path();

  AnalysisSet set;
  set.source = path;
  set.groups = required<std::vector<std::string>>(doc, "groups", where);
  set.layers = required<std::vector<int>>(doc, "layers", where);
  set.categories = required<std::vector<std::string>>(doc, "categories", where);
  if (set.groups.empty()) throw Error(ErrorCode::ParseError, where + ": no groups");

  const std::set<std::string> groups(set.groups.begin(), set.groups.end());
  const std::set<int> layers(set.layers.begin(), set.layers.end());
  const std::set<std::string> categories(set.categories.begin(), set.categories.end());
  if (groups.size() != set.groups.size()) throw Error(ErrorCode::ParseError, where + ": duplicate group id");

  const json& entries = doc.contains("entries") ? doc["entries"] : json::array();
  if (!entries.is_array()) throw Error(ErrorCode::ParseError, where + ": 'entries' must be an array");

  std::optional<std::uint64_t> d;
  for (const auto& e : entries) {
    CellKey key{required<std::string>(e, "group", where), required<int>(e, "layer", where),
                required<std::string>(e, "category", where)};
    const std::string cell = key.group + "/" + std::to_string(key.layer) + "/" + key.category;
    if (!groups.count(key.group) || !layers.count(key.layer) || !categories.count(key.category))
      throw Error(ErrorCode::ParseError, where + ": entry " + cell + " uses an undeclared label");

    EntryPair pair{check_matrix(base, required<std::string>(e, "experimental", where)),
                   check_matrix(base, required<std::string>(e, "control", where))};
    if (pair.experimental.rows != pair.control.rows)
      throw Error(ErrorCode::DimensionMismatch, cell + ": experimental has " + std::to_string(pair.experimental.rows) +
                                                    " rows, control has " + std::to_string(pair.control.rows));
    if (d && *d != pair.experimental.cols)
      throw Error(ErrorCode::DimensionMismatch, cell + ": experimental dimension " +
                                                    std::to_string(pair.experimental.cols) + " differs from " +
                                                    std::to_string(*d));
    d = pair.experimental.cols;
    if (!set.entries.emplace(std::move(key), std::move(pair)).second)
      throw Error(ErrorCode::ParseError, where + ": duplicate entry " + cell);
  }

  if (doc.contains("external_scores")) {
    try {
      set.external_scores = doc["external_scores"].get<std::map<std::string, std::map<std::string, double>>>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, where + ": bad external_scores: " + e.what());
    }
  }

  if (doc.contains("profiles")) {
    for (const auto& p : doc["profiles"]) {
      const auto group = required<std::string>(p, "group", where);
      if (p.contains("corpus")) {
        std::filesystem::path c = p["corpus"].get<std::string>();
        if (c.is_relative()) c = base / c;
        if (!std::filesystem::exists(c)) throw Error(ErrorCode::DanglingPath, c.string());
        set.corpora[group] = c;
        continue;
      }
      LanguageProfile lp;
      lp.group_id = group;
      lp.unique_chars = required<std::int64_t>(p, "unique_chars", where);
      lp.ttr = required<double>(p, "ttr", where);
      lp.data_size = required<std::int64_t>(p, "data_size", where);
      if (lp.unique_chars < 1 || !(lp.ttr > 0.0 && lp.ttr <= 1.0) || lp.data_size < 0)
        throw Error(ErrorCode::ParseError, where + ": profile for " + group + " violates its invariants");
      set.profiles[group] = lp;
    }
  }
  return set;
}

}  // namespace repfactor
