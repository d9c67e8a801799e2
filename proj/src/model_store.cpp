#include "repfactor/model_store.hpp"

#include <fstream>

#include "json.hpp"
#include "repfactor/matrix_io.hpp"

namespace repfactor {

const char* to_string(InitMethod m) { return m == InitMethod::Random ? "random" : "svd"; }

InitMethod parse_init_method(const std::string& s) {
  if (s == "random") return InitMethod::Random;
  if (s == "svd" || s == "svd-based") return InitMethod::Svd;
  throw Error(ErrorCode::Usage, "unknown init method '" + s + "' (expected random or svd)");
}

void save_model(const StoredModel& stored, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& m = stored.model;
  write_matrix(m.v, dir / "V.rfm");
  write_matrix(m.h, dir / "H.rfm");
  for (std::size_t l = 0; l < m.groups(); ++l) {
    write_matrix(m.q[l], dir / ("Q_" + std::to_string(l) + ".rfm"));
    write_matrix(Matrix<double>(m.sigma[l]), dir / ("sigma_" + std::to_string(l) + ".rfm"));
  }

  nlohmann::ordered_json meta;
  meta["rank"] = m.rank;
  meta["fit"] = m.fit;
  meta["iterations"] = m.iterations;
  meta["converged"] = m.converged;
  meta["seed"] = stored.options.seed;
  meta["groups"] = stored.groups;
  meta["layer"] = stored.layer;
  meta["category"] = stored.category;
  meta["options"] = {{"rank", stored.options.rank},
                     {"max_sweeps", stored.options.max_sweeps},
                     {"rel_tol", stored.options.rel_tol},
                     {"seed", stored.options.seed},
                     {"init", to_string(stored.options.init)}};
  meta["error_history_tail"] = m.error_history.empty() ? 0.0 : m.error_history.back();

  std::ofstream out(dir / "model.json");
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + (dir / "model.json").string());
  out << meta.dump(2) << '\n';
}

StoredModel load_model(const std::filesystem::path& dir) {
  std::ifstream in(dir / "model.json");
  if (!in) throw Error(ErrorCode::MissingFile, (dir / "model.json").string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, (dir / "model.json").string() + ": " + e.what());
  }

  StoredModel s;
  try {
    s.groups = meta.at("groups").get<std::vector<std::string>>();
    s.layer = meta.at("layer").get<int>();
    s.category = meta.at("category").get<std::string>();
    const auto& o = meta.at("options");
    s.options.rank = o.at("rank").get<Index>();
    s.options.max_sweeps = o.at("max_sweeps").get<int>();
    s.options.rel_tol = o.at("rel_tol").get<double>();
    s.options.seed = o.at("seed").get<std::uint64_t>();
    s.options.init = parse_init_method(o.at("init").get<std::string>());
    s.model.rank = meta.at("rank").get<Index>();
    s.model.fit = meta.at("fit").get<double>();
    s.model.iterations = meta.at("iterations").get<int>();
    s.model.converged = meta.at("converged").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, (dir / "model.json").string() + ": " + e.what());
  }

  s.model.v = read_matrix(dir / "V.rfm").values;
  s.model.h = read_matrix(dir / "H.rfm").values;
  for (std::size_t l = 0; l < s.groups.size(); ++l) {
    s.model.q.push_back(read_matrix(dir / ("Q_" + std::to_string(l) + ".rfm")).values);
    s.model.sigma.push_back(read_matrix(dir / ("sigma_" + std::to_string(l) + ".rfm")).values.col(0));
  }
  return s;
}

}  // namespace repfactor
