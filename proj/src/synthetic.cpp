#include "repfactor/synthetic.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <string>

#include "json.hpp"
#include "repfactor/covariance.hpp"
#include "repfactor/matrix_io.hpp"

namespace repfactor {
namespace {

Matrix<double> gaussian(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix<double> a(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) a(i, j) = dist(rng);
  return a;
}

Matrix<double> random_orthonormal(Index rows, Index cols, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Matrix<double>> qr(gaussian(rows, cols, rng));
  return qr.householderQ() * Matrix<double>::Identity(rows, cols);
}

Matrix<double> unit_columns(Matrix<double> a) {
  a.colwise().normalize();
  return a;
}

std::mt19937_64 cell_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(c)};
  return std::mt19937_64(seq);
}

void append_utf8(std::string& out, char32_t c) {
  if (c < 0x80) {
    out += static_cast<char>(c);
  } else if (c < 0x800) {
    out += static_cast<char>(0xC0 | (c >> 6));
    out += static_cast<char>(0x80 | (c & 0x3F));
  } else {
    out += static_cast<char>(0xE0 | (c >> 12));
    out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (c & 0x3F));
  }
}

struct GroupSpec {
  const char* id;
  int family;
};

constexpr std::array<GroupSpec, 6> kGroups{{{"a1", 0}, {"a2", 0}, {"b1", 1}, {"b2", 1}, {"c1", 2}, {"c2", 2}}};
constexpr std::array<const char*, 3> kCategories{"ALL", "Number", "Tense"};
// Latin, Cyrillic and Greek base letters per family.
constexpr std::array<char32_t, 3> kAlphabetBase{U'a', U'а', U'α'};

}  // namespace

PlantedProblem plant_parafac2(const PlantOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> sig(opts.sigma_min, opts.sigma_max);

  PlantedProblem p;
  p.h = unit_columns(gaussian(opts.rank, opts.rank, rng));
  p.v = unit_columns(gaussian(opts.cols, opts.rank, rng));
  for (std::size_t l = 0; l < opts.groups; ++l) {
    p.q.push_back(random_orthonormal(opts.slice_rows, opts.rank, rng));
    Vector<double> s(opts.rank);
    for (Index r = 0; r < opts.rank; ++r) s(r) = sig(rng);
    p.sigma.push_back(s);
  }
  for (std::size_t l = 0; l < opts.groups; ++l) {
    CovarianceSlice<double> slice;
    slice.group_id = "g" + std::to_string(l);
    slice.omega = p.q[l] * p.h * p.sigma[l].asDiagonal() * p.v.transpose();
    if (opts.snr_db) {
      Matrix<double> noise = gaussian(slice.omega.rows(), slice.omega.cols(), rng);
      noise *= slice.omega.norm() * std::pow(10.0, -*opts.snr_db / 20.0) / noise.norm();
      slice.omega += noise;
    }
    p.slices.push_back(std::move(slice));
  }
  return p;
}

void write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticDatasetOptions& opts) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "matrices");
  fs::create_directories(dir / "corpora");

  // Family-specific strength patterns over the latent directions.
  const std::array<std::array<double, 4>, 3> pattern{{{3.0, 2.0, 1.0, 0.5}, {1.0, 3.0, 0.5, 2.0}, {0.5, 1.0, 3.0, 2.0}}};

  nlohmann::ordered_json manifest;
  std::vector<std::string> groups;
  for (const auto& g : kGroups) groups.push_back(g.id);
  std::vector<int> layers;
  for (int l = 0; l < opts.layers; ++l) layers.push_back(l);
  manifest["groups"] = groups;
  manifest["layers"] = layers;
  manifest["categories"] = kCategories;
  manifest["entries"] = nlohmann::json::array();

  const Index r = opts.latent_rank;
  for (std::size_t c = 0; c < kCategories.size(); ++c) {
    auto shared_rng = cell_rng(opts.seed, 1000, c, 0);
    const Matrix<double> shared = random_orthonormal(opts.experimental_dim, r, shared_rng);
    for (std::size_t gi = 0; gi < kGroups.size(); ++gi) {
      const std::string category = kCategories[c];
      const std::string group = kGroups[gi].id;
      if (group == "c2" && category == "Tense") continue;

      const Index control_dim = 10 + static_cast<Index>(gi % 3);
      auto group_rng = cell_rng(opts.seed, 2000 + gi, c, 0);
      const Matrix<double> rotation = random_orthonormal(control_dim, r, group_rng);
      std::uniform_real_distribution<double> jitter(0.95, 1.05);
      Vector<double> strength(r);
      for (Index j = 0; j < r; ++j)
        strength(j) = pattern[static_cast<std::size_t>(kGroups[gi].family)][static_cast<std::size_t>(j % 4)] *
                      jitter(group_rng);

      for (int layer = 0; layer < opts.layers; ++layer) {
        auto rng = cell_rng(opts.seed, gi, static_cast<std::uint64_t>(layer), c);
        const double decay = 1.0 - 0.5 * layer / std::max(1, opts.layers - 1);
        ReprMatrix y, z;
        // Centered with orthogonal columns, so Y^T Y = rows * I and the
        // cross-covariance keeps the shared factor exactly.
        const Matrix<double> raw = center_columns(gaussian(opts.rows, opts.experimental_dim, rng));
        Eigen::HouseholderQR<Matrix<double>> qr(raw);
        y.values = std::sqrt(static_cast<double>(opts.rows)) * (qr.householderQ() * Matrix<double>::Identity(opts.rows, opts.experimental_dim));
        const Matrix<double> w = shared * (decay * strength).asDiagonal() * rotation.transpose();
        z.values = y.values * w + 0.05 * gaussian(opts.rows, control_dim, rng);

        const std::string stem = group + "_L" + std::to_string(layer) + "_" + category;
        write_matrix(y, dir / "matrices" / (stem + "_exp.rfm"));
        write_matrix(z, dir / "matrices" / (stem + "_ctl.rfm"));
        manifest["entries"].push_back({{"group", group},
                                       {"layer", layer},
                                       {"category", category},
                                       {"experimental", "matrices/" + stem + "_exp.rfm"},
                                       {"control", "matrices/" + stem + "_ctl.rfm"}});
      }
    }
  }

  // Corpora: alphabet size and vocabulary grow with the group index.
  manifest["profiles"] = nlohmann::json::array();
  for (std::size_t gi = 0; gi < kGroups.size(); ++gi) {
    auto rng = cell_rng(opts.seed, 3000 + gi, 0, 0);
    const int alphabet = 10 + 3 * static_cast<int>(gi);
    const int vocabulary = 40 + 25 * static_cast<int>(gi);
    std::uniform_int_distribution<int> letter(0, alphabet - 1);
    std::uniform_int_distribution<int> length(2, 6);
    std::vector<std::string> lemmas;
    for (int v = 0; v < vocabulary; ++v) {
      std::string w;
      for (int i = length(rng); i > 0; --i)
        append_utf8(w, kAlphabetBase[static_cast<std::size_t>(kGroups[gi].family)] + static_cast<char32_t>(letter(rng)));
      lemmas.push_back(w);
    }
    std::uniform_int_distribution<std::size_t> pick(0, lemmas.size() - 1);
    const std::string file = std::string("corpora/") + kGroups[gi].id + ".tsv";
    std::ofstream out(dir / file);
    for (int t = 0; t < 300 + 40 * static_cast<int>((gi * 5 + 2) % 6); ++t) {
      const std::string& lemma = lemmas[pick(rng)];
      std::string token = lemma;
      if (t % 3 == 0) append_utf8(token, kAlphabetBase[static_cast<std::size_t>(kGroups[gi].family)]);
      out << token << '\t' << lemma << '\n';
    }
    manifest["profiles"].push_back({{"group", kGroups[gi].id}, {"corpus", file}});
  }

  manifest["external_scores"] = {
      {"synthetic_task", {{"a1", 71.5}, {"a2", 70.1}, {"b1", 64.2}, {"b2", 65.0}, {"c1", 58.3}, {"c2", 57.9}}},
      {"subset_task", {{"a1", 0.61}, {"b1", 0.55}, {"c1", 0.42}, {"c2", 0.47}}}};

  {
    std::ofstream out(dir / "manifest.json");
    out << manifest.dump(2) << '\n';
  }

  nlohmann::ordered_json config;
  config["manifest"] = "manifest.json";
  config["output_dir"] = "out";
  config["solver"] = {{"rank", r}, {"max_sweeps", 3000}, {"rel_tol", 1e-8}, {"seed", 11}, {"init", "svd"}};
  config["center"] = true;
  config["normalize"] = false;
  config["analyses"] = nlohmann::json::array(
      {{{"type", "trend"}, {"category", "ALL"}, {"alpha", 0.05}, {"q", 0.05}},
       {{"type", "trend"}, {"category", "Number"}, {"alpha", 0.05}, {"q", 0.05}},
       {{"type", "property_correlation"}, {"property", "unique_chars"}, {"category", "ALL"}},
       {{"type", "property_correlation"}, {"property", "ttr"}, {"category", "ALL"}},
       {{"type", "property_correlation"}, {"property", "data_size"}, {"category", "ALL"}},
       {{"type", "variance_test"},
        {"layer", 0},
        {"category", "ALL"},
        {"sample_groups", {"a1", "b1", "c1", "c2"}},
        {"reference_groups", {"a1", "a2", "b2"}},
        {"alternative", "two_sided"}},
       {{"type", "tree"}, {"category", "ALL"}},
       {{"type", "external_correlation"}}});
  config["tree_exclude_categories"] = {"POS"};
  std::ofstream out(dir / "config.json");
  out << config.dump(2) << '\n';
}

}  // namespace repfactor
