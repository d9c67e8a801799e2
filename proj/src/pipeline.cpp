#include "repfactor/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "repfactor/covariance.hpp"
#include "repfactor/csv.hpp"
#include "repfactor/hash.hpp"
#include "repfactor/manifest.hpp"
#include "repfactor/model_store.hpp"
#include "repfactor/phylo.hpp"
#include "repfactor/profile.hpp"
#include "repfactor/signatures.hpp"

namespace repfactor {
namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// small file helpers

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Leaves the file untouched when the content is already identical.
void write_text(const fs::path& p, const std::string& content) {
  std::error_code ec;
  if (fs::exists(p, ec) && read_text(p) == content) return;
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + p.string());
  out << content;
  if (!out) throw Error(ErrorCode::IoFailure, "short write to " + p.string());
}

json read_json(const fs::path& p) {
  try {
    return json::parse(read_text(p));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, p.string() + ": " + e.what());
  }
}

std::string cell_name(int layer, const std::string& category) {
  std::string safe;
  for (char c : category) safe += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return "L" + std::to_string(layer) + "_" + safe;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first failure in
// index order is rethrown, so errors are reproducible.
template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// stamps

struct Context {
  const PipelineConfig& config;
  fs::path out;

  fs::path stamp_path(Stage s) const { return out / "stamps" / (std::string(stage_name(s)) + ".json"); }

  std::string upstream_key(Stage s) const {
    const fs::path p = stamp_path(s);
    if (!fs::exists(p)) throw Error(ErrorCode::MissingStage, std::string("missing stage: ") + stage_name(s));
    return read_json(p).at("key").get<std::string>();
  }

  Artifact artifact(const fs::path& abs) const {
    return {abs.lexically_relative(out).generic_string(), sha256_file(abs)};
  }
};

bool stamp_current(const Context& ctx, Stage s, const std::string& key, StageReport& report) {
  const fs::path p = ctx.stamp_path(s);
  if (!fs::exists(p)) return false;
  const json stamp = read_json(p);
  if (stamp.value("key", "") != key) return false;
  std::vector<Artifact> artifacts;
  for (const auto& a : stamp.at("artifacts")) {
    const fs::path abs = ctx.out / a.at("path").get<std::string>();
    std::error_code ec;
    if (!fs::is_regular_file(abs, ec) || sha256_file(abs) != a.at("sha256").get<std::string>()) return false;
    artifacts.push_back({a.at("path").get<std::string>(), a.at("sha256").get<std::string>()});
  }
  report.artifacts = std::move(artifacts);
  report.up_to_date = true;
  return true;
}

void write_stamp(const Context& ctx, const StageReport& report) {
  ordered_json stamp;
  stamp["stage"] = stage_name(report.stage);
  stamp["key"] = report.key;
  stamp["artifacts"] = ordered_json::array();
  for (const auto& a : report.artifacts) stamp["artifacts"].push_back({{"path", a.path}, {"sha256", a.sha256}});
  write_text(ctx.stamp_path(report.stage), stamp.dump(2) + "\n");
}

std::string solver_fingerprint(const SolverOptions& o) {
  ordered_json j{{"rank", o.rank},
                 {"max_sweeps", o.max_sweeps},
                 {"rel_tol", format_exact(o.rel_tol)},
                 {"seed", o.seed},
                 {"init", to_string(o.init)}};
  return j.dump();
}

// Every (layer, category) cell selected by the config filters, with the
// groups that have data for it.
struct Unit {
  int layer;
  std::string category;
  std::vector<std::string> groups;
};

std::vector<Unit> select_units(const AnalysisSet& set, const PipelineConfig& config, std::vector<std::string>& notes) {
  std::vector<Unit> units;
  for (const auto& category : set.categories) {
    if (!config.categories.empty() &&
        std::find(config.categories.begin(), config.categories.end(), category) == config.categories.end())
      continue;
    for (int layer : set.layers) {
      if (!config.layers.empty() && std::find(config.layers.begin(), config.layers.end(), layer) == config.layers.end())
        continue;
      auto groups = groups_with_cell(set, layer, category);
      if (groups.size() < 2) {
        notes.push_back(cell_name(layer, category) + ": fewer than 2 groups, not decomposed");
        continue;
      }
      units.push_back({layer, category, std::move(groups)});
    }
  }
  return units;
}

// ---------------------------------------------------------------------------
// stages

StageReport stage_ingest(const Context& ctx) {
  StageReport r;
  r.stage = Stage::Ingest;
  const AnalysisSet set = load_manifest(ctx.config.manifest_path);
  const fs::path base = ctx.config.manifest_path.parent_path();

  Sha256 key;
  key.field("ingest").field(sha256_file(ctx.config.manifest_path));
  ordered_json doc;
  doc["groups"] = set.groups;
  doc["layers"] = set.layers;
  doc["categories"] = set.categories;
  doc["entries"] = ordered_json::array();
  for (const auto& [cell, pair] : set.entries) {
    const std::string he = sha256_file(pair.experimental.path);
    const std::string hc = sha256_file(pair.control.path);
    key.field(he).field(hc);
    doc["entries"].push_back({{"group", cell.group},
                              {"layer", cell.layer},
                              {"category", cell.category},
                              {"experimental", pair.experimental.path.lexically_relative(base).generic_string()},
                              {"experimental_sha256", he},
                              {"control", pair.control.path.lexically_relative(base).generic_string()},
                              {"control_sha256", hc},
                              {"rows", pair.experimental.rows},
                              {"d", pair.experimental.cols},
                              {"d_control", pair.control.cols}});
  }
  doc["corpora"] = ordered_json::object();
  for (const auto& [g, p] : set.corpora) {
    const std::string h = sha256_file(p);
    key.field(g).field(h);
    doc["corpora"][g] = h;
  }
  r.key = key.hex();
  if (stamp_current(ctx, Stage::Ingest, r.key, r)) return r;

  const fs::path out = ctx.out / "ingest" / "analysis_set.json";
  write_text(out, doc.dump(2) + "\n");
  r.artifacts.push_back(ctx.artifact(out));
  write_stamp(ctx, r);
  return r;
}

StageReport stage_profile(const Context& ctx) {
  StageReport r;
  r.stage = Stage::Profile;
  r.key = Sha256().field("profile").field(ctx.upstream_key(Stage::Ingest))
              .field(ctx.config.case_fold_lemmas ? "fold" : "nofold").hex();
  if (stamp_current(ctx, Stage::Profile, r.key, r)) return r;

  const AnalysisSet set = load_manifest(ctx.config.manifest_path);
  std::map<std::string, LanguageProfile> profiles = set.profiles;
  ProfileOptions opts;
  opts.case_fold_lemmas = ctx.config.case_fold_lemmas;
  for (const auto& [g, path] : set.corpora) {
    LanguageProfile p = profile_corpus(read_corpus(path), opts);
    p.group_id = g;
    profiles[g] = p;
  }

  std::ostringstream csvout;
  csvout << "group,unique_chars,ttr,data_size\n";
  for (const auto& g : set.groups) {
    auto it = profiles.find(g);
    if (it == profiles.end()) continue;
    csvout << csv::escape(g) << ',' << it->second.unique_chars << ',' << format_exact(it->second.ttr) << ','
           << it->second.data_size << '\n';
  }
  const fs::path out = ctx.out / "profile" / "profiles.csv";
  write_text(out, csvout.str());
  r.artifacts.push_back(ctx.artifact(out));
  write_stamp(ctx, r);
  return r;
}

std::map<std::string, LanguageProfile> read_profiles(const fs::path& p) {
  std::istringstream in(read_text(p));
  std::string line;
  std::getline(in, line);
  std::map<std::string, LanguageProfile> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 4) throw Error(ErrorCode::ParseError, p.string() + ": bad profile row");
    LanguageProfile lp{f[0], std::stoll(f[1]), std::stod(f[2]), std::stoll(f[3])};
    out[lp.group_id] = lp;
  }
  return out;
}

StageReport stage_covariance(const Context& ctx) {
  const auto& cfg = ctx.config;
  StageReport r;
  r.stage = Stage::Covariance;
  const std::string ingest_key = ctx.upstream_key(Stage::Ingest);
  ordered_json filters{{"layers", cfg.layers}, {"categories", cfg.categories}};
  r.key = Sha256().field("covariance").field(ingest_key).field(cfg.center ? "center" : "raw")
              .field(cfg.normalize ? "normalize" : "plain").field(filters.dump()).hex();
  if (stamp_current(ctx, Stage::Covariance, r.key, r)) return r;

  const AnalysisSet set = load_manifest(cfg.manifest_path);
  const auto units = select_units(set, cfg, r.notes);
  const CovarianceOptions opts{cfg.center, cfg.normalize, false};

  // Cache key per unit covers only what the slices depend on.
  std::vector<fs::path> dirs(units.size());
  for (std::size_t i = 0; i < units.size(); ++i) {
    Sha256 h;
    h.field("slices").field(std::to_string(units[i].layer)).field(units[i].category)
        .field(cfg.center ? "center" : "raw").field(cfg.normalize ? "normalize" : "plain");
    for (const auto& g : units[i].groups) {
      const EntryPair* e = set.find({g, units[i].layer, units[i].category});
      h.field(g).field(sha256_file(e->experimental.path)).field(sha256_file(e->control.path));
    }
    dirs[i] = ctx.out / "cache" / "covariance" / h.hex();
  }

  parallel_for(units.size(), resolve_jobs(cfg.jobs), [&](std::size_t i) {
    const Unit& u = units[i];
    if (fs::exists(dirs[i] / "slices.json")) return;
    try {
      const auto slices = build_slices(set, u.layer, u.category, opts, u.groups);
      const fs::path tmp = dirs[i].string() + ".partial";
      fs::remove_all(tmp);
      fs::create_directories(tmp);
      ordered_json meta{{"layer", u.layer}, {"category", u.category}, {"groups", u.groups}};
      meta["m"] = ordered_json::array();
      for (std::size_t l = 0; l < slices.size(); ++l) {
        write_matrix(slices[l].omega, tmp / ("omega_" + std::to_string(l) + ".rfm"));
        meta["m"].push_back(slices[l].m);
      }
      write_text(tmp / "slices.json", meta.dump(2) + "\n");
      fs::rename(tmp, dirs[i]);
    } catch (const Error& e) {
      throw Error(e.code(), cell_name(u.layer, u.category) + ": " + e.detail());
    }
  });

  ordered_json index;
  index["units"] = ordered_json::array();
  for (std::size_t i = 0; i < units.size(); ++i) {
    index["units"].push_back({{"layer", units[i].layer},
                              {"category", units[i].category},
                              {"groups", units[i].groups},
                              {"dir", dirs[i].lexically_relative(ctx.out).generic_string()}});
    for (const auto& entry : fs::directory_iterator(dirs[i])) r.artifacts.push_back(ctx.artifact(entry.path()));
  }
  index["notes"] = r.notes;
  const fs::path out = ctx.out / "covariance" / "index.json";
  write_text(out, index.dump(2) + "\n");
  r.artifacts.insert(r.artifacts.begin(), ctx.artifact(out));
  std::sort(r.artifacts.begin() + 1, r.artifacts.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  write_stamp(ctx, r);
  return r;
}

StageReport stage_decompose(const Context& ctx) {
  const auto& cfg = ctx.config;
  StageReport r;
  r.stage = Stage::Decompose;
  const std::string cov_key = ctx.upstream_key(Stage::Covariance);
  const std::string solver = solver_fingerprint(cfg.solver);
  r.key = Sha256().field("decompose").field(cov_key).field(solver).hex();
  if (stamp_current(ctx, Stage::Decompose, r.key, r)) return r;

  const json cov_index = read_json(ctx.out / "covariance" / "index.json");
  const auto& units = cov_index.at("units");
  const std::size_t n = units.size();
  std::vector<fs::path> dirs(n);
  for (std::size_t i = 0; i < n; ++i)
    dirs[i] = ctx.out / "cache" / "models" /
              Sha256().field("model").field(units[i].at("dir").get<std::string>()).field(solver).hex();

  parallel_for(n, resolve_jobs(cfg.jobs), [&](std::size_t i) {
    const auto& u = units[i];
    if (fs::exists(dirs[i] / "model.json")) return;
    const int layer = u.at("layer").get<int>();
    const auto category = u.at("category").get<std::string>();
    const auto groups = u.at("groups").get<std::vector<std::string>>();
    try {
      const fs::path src = ctx.out / u.at("dir").get<std::string>();
      std::vector<CovarianceSlice<double>> slices;
      const json meta = read_json(src / "slices.json");
      for (std::size_t l = 0; l < groups.size(); ++l) {
        CovarianceSlice<double> s;
        s.group_id = groups[l];
        s.omega = read_matrix(src / ("omega_" + std::to_string(l) + ".rfm")).values;
        s.m = meta.at("m").at(l).get<Index>();
        slices.push_back(std::move(s));
      }
      StoredModel stored{decompose(slices, cfg.solver), groups, layer, category, cfg.solver};
      const fs::path tmp = dirs[i].string() + ".partial";
      fs::remove_all(tmp);
      save_model(stored, tmp);
      fs::rename(tmp, dirs[i]);
    } catch (const Error& e) {
      throw Error(e.code(), cell_name(layer, category) + ": " + e.detail());
    }
  });

  ordered_json index;
  index["units"] = ordered_json::array();
  for (std::size_t i = 0; i < n; ++i) {
    const StoredModel s = load_model(dirs[i]);
    index["units"].push_back({{"layer", s.layer},
                              {"category", s.category},
                              {"groups", s.groups},
                              {"dir", dirs[i].lexically_relative(ctx.out).generic_string()},
                              {"fit", format_exact(s.model.fit)},
                              {"iterations", s.model.iterations},
                              {"converged", s.model.converged}});
    if (!s.model.converged) r.notes.push_back(cell_name(s.layer, s.category) + ": not converged");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dirs[i])) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) r.artifacts.push_back(ctx.artifact(f));
  }
  const fs::path out = ctx.out / "decompose" / "index.json";
  write_text(out, index.dump(2) + "\n");
  r.artifacts.insert(r.artifacts.begin(), ctx.artifact(out));
  write_stamp(ctx, r);
  return r;
}

SignatureTable load_signatures(const Context& ctx) {
  std::istringstream in(read_text(ctx.out / "signatures" / "signatures.csv"));
  return read_signature_csv(in);
}

StageReport stage_signatures(const Context& ctx) {
  StageReport r;
  r.stage = Stage::Signatures;
  r.key = Sha256().field("signatures").field(ctx.upstream_key(Stage::Decompose)).hex();
  if (stamp_current(ctx, Stage::Signatures, r.key, r)) return r;

  const json index = read_json(ctx.out / "decompose" / "index.json");
  std::vector<DecompositionRun> runs;
  for (const auto& u : index.at("units")) {
    StoredModel s = load_model(ctx.out / u.at("dir").get<std::string>());
    runs.push_back({s.groups, s.layer, s.category, std::move(s.model)});
  }
  std::ostringstream csvout;
  write_signature_csv(build_table(runs), csvout);
  const fs::path out = ctx.out / "signatures" / "signatures.csv";
  write_text(out, csvout.str());
  r.artifacts.push_back(ctx.artifact(out));
  write_stamp(ctx, r);
  return r;
}

std::vector<TrendSpec> effective_trends(const PipelineConfig& cfg, const SignatureTable& table) {
  if (cfg.analyses_configured) return cfg.trends;
  std::vector<TrendSpec> out;
  for (const auto& c : table.categories()) out.push_back({c, 0.05, 0.05});
  return out;
}

StageReport stage_trend(const Context& ctx) {
  StageReport r;
  r.stage = Stage::StatsTrend;
  ordered_json specs = ordered_json::array();
  for (const auto& t : ctx.config.trends)
    specs.push_back({t.category, format_exact(t.alpha), format_exact(t.q)});
  r.key = Sha256().field("stats-trend").field(ctx.upstream_key(Stage::Signatures)).field(specs.dump())
              .field(ctx.config.analyses_configured ? "configured" : "default").hex();
  if (stamp_current(ctx, Stage::StatsTrend, r.key, r)) return r;

  const SignatureTable table = load_signatures(ctx);
  for (const auto& spec : effective_trends(ctx.config, table)) {
    const TrendAnalysis a = layer_trend_analysis(table, spec.category, spec.alpha, spec.q);
    std::ostringstream out;
    out << "group,category,S,Z,p,p_adjusted,direction\n";
    for (const auto& t : a.results)
      out << csv::escape(t.group_id) << ',' << csv::escape(spec.category) << ',' << t.s_statistic << ','
          << format_exact(t.z_score) << ',' << format_exact(t.p_value) << ',' << format_exact(t.p_adjusted) << ','
          << to_string(t.direction) << '\n';
    for (const auto& s : a.skipped) r.notes.push_back("trend " + spec.category + ": skipped " + s);
    const fs::path p = ctx.out / "stats" / ("trend_" + cell_name(0, spec.category).substr(3) + ".csv");
    write_text(p, out.str());
    r.artifacts.push_back(ctx.artifact(p));
  }
  write_stamp(ctx, r);
  return r;
}

// Correlation rows; cells with too few points or constant input print NA.
void correlation_row(std::ostringstream& out, const std::string& label, int layer, const std::string& category,
                     const std::function<CorrelationResult()>& fn, std::vector<std::string>& notes) {
  out << csv::escape(label) << ',' << layer << ',' << csv::escape(category) << ',';
  try {
    const CorrelationResult c = fn();
    out << format_exact(c.r) << ',' << c.n << '\n';
  } catch (const Error& e) {
    if (e.code() != ErrorCode::TooFewPoints && e.code() != ErrorCode::ConstantInput) throw;
    out << "NA,0\n";
    notes.push_back(label + " " + cell_name(layer, category) + ": " + e.what());
  }
}

StageReport stage_correlate(const Context& ctx) {
  const auto& cfg = ctx.config;
  StageReport r;
  r.stage = Stage::StatsCorrelate;
  ordered_json specs = ordered_json::array();
  for (const auto& p : cfg.property_correlations)
    specs.push_back({to_string(p.property), p.layer ? *p.layer : -1, p.category});
  for (const auto& e : cfg.external_correlations)
    specs.push_back({"external", e.layer ? *e.layer : -1, e.category, e.tasks});

  const AnalysisSet set = load_manifest(cfg.manifest_path);
  std::vector<PropertyCorrelationSpec> props = cfg.property_correlations;
  std::vector<ExternalCorrelationSpec> externals = cfg.external_correlations;
  if (!cfg.analyses_configured) {
    if (!set.profiles.empty() || !set.corpora.empty())
      for (auto p : {GroupProperty::UniqueChars, GroupProperty::Ttr, GroupProperty::DataSize})
        for (const auto& c : set.categories) props.push_back({p, std::nullopt, c});
    if (!set.external_scores.empty()) externals.push_back({});
  }

  Sha256 key;
  key.field("stats-correlate").field(ctx.upstream_key(Stage::Signatures)).field(specs.dump())
      .field(cfg.analyses_configured ? "configured" : "default");
  if (!props.empty()) key.field(ctx.upstream_key(Stage::Profile));
  for (const auto& [task, scores] : set.external_scores) {
    key.field(task);
    for (const auto& [g, s] : scores) key.field(g).field(format_exact(s));
  }
  r.key = key.hex();
  if (stamp_current(ctx, Stage::StatsCorrelate, r.key, r)) return r;

  const SignatureTable table = load_signatures(ctx);
  const auto layers = table.layers();

  if (!props.empty()) {
    const auto profiles = read_profiles(ctx.out / "profile" / "profiles.csv");
    std::ostringstream out;
    out << "property,layer,category,r,n\n";
    for (const auto& spec : props) {
      std::vector<int> ls = spec.layer ? std::vector<int>{*spec.layer} : layers;
      for (int layer : ls)
        correlation_row(out, to_string(spec.property), layer, spec.category,
                        [&] { return property_correlation(table, profiles, spec.property, layer, spec.category); },
                        r.notes);
    }
    const fs::path p = ctx.out / "stats" / "correlations.csv";
    write_text(p, out.str());
    r.artifacts.push_back(ctx.artifact(p));
  }

  if (!externals.empty() && !set.external_scores.empty()) {
    std::ostringstream out;
    out << "property,layer,category,r,n\n";
    for (const auto& spec : externals) {
      const int layer = spec.layer ? *spec.layer : (layers.empty() ? 0 : layers.back());
      for (const auto& [task, scores] : set.external_scores) {
        if (!spec.tasks.empty() && std::find(spec.tasks.begin(), spec.tasks.end(), task) == spec.tasks.end())
          continue;
        correlation_row(out, task, layer, spec.category,
                        [&] { return external_score_correlation(table, scores, layer, spec.category); }, r.notes);
      }
    }
    const fs::path p = ctx.out / "stats" / "external_correlations.csv";
    write_text(p, out.str());
    r.artifacts.push_back(ctx.artifact(p));
  }
  write_stamp(ctx, r);
  return r;
}

StageReport stage_variance(const Context& ctx) {
  StageReport r;
  r.stage = Stage::StatsVarianceTest;
  ordered_json specs = ordered_json::array();
  for (const auto& v : ctx.config.variance_tests)
    specs.push_back({v.layer, v.category, v.sample_groups, v.reference_groups, to_string(v.alternative)});
  r.key = Sha256().field("stats-variance-test").field(ctx.upstream_key(Stage::Signatures)).field(specs.dump()).hex();
  if (stamp_current(ctx, Stage::StatsVarianceTest, r.key, r)) return r;

  if (!ctx.config.variance_tests.empty()) {
    const SignatureTable table = load_signatures(ctx);
    std::ostringstream out;
    out << "layer,category,chi2,df,p,sample_variance,reference_variance,alternative\n";
    for (const auto& v : ctx.config.variance_tests) {
      const VarianceTestResult t =
          group_variance_test(table, v.layer, v.category, v.sample_groups, v.reference_groups, v.alternative);
      out << v.layer << ',' << csv::escape(v.category) << ',' << format_exact(t.chi2) << ',' << t.df << ','
          << format_exact(t.p_value) << ',' << format_exact(t.sample_variance) << ','
          << format_exact(t.reference_variance) << ',' << to_string(v.alternative) << '\n';
    }
    const fs::path p = ctx.out / "stats" / "variance_tests.csv";
    write_text(p, out.str());
    r.artifacts.push_back(ctx.artifact(p));
  }
  write_stamp(ctx, r);
  return r;
}

StageReport stage_tree(const Context& ctx) {
  const auto& cfg = ctx.config;
  StageReport r;
  r.stage = Stage::Tree;
  ordered_json specs = ordered_json::array();
  for (const auto& t : cfg.trees) specs.push_back({t.layers, t.category, t.precision});
  r.key = Sha256().field("tree").field(ctx.upstream_key(Stage::Signatures)).field(specs.dump())
              .field(ordered_json(cfg.tree_exclude_categories).dump())
              .field(cfg.analyses_configured ? "configured" : "default").hex();
  if (stamp_current(ctx, Stage::Tree, r.key, r)) return r;

  const SignatureTable table = load_signatures(ctx);
  std::vector<TreeSpec> trees = cfg.trees;
  if (!cfg.analyses_configured && !table.categories().empty()) {
    const auto& cats = table.categories();
    const bool has_all = std::find(cats.begin(), cats.end(), "ALL") != cats.end();
    trees.push_back({{}, has_all ? "ALL" : cats.front(), 6});
  }
  const int precision = trees.empty() ? 6 : trees.front().precision;

  auto emit = [&](const std::string& stem, const DistanceMatrix& d, int digits) {
    std::ostringstream dist;
    write_distance_csv(d, dist);
    const fs::path pd = ctx.out / "tree" / (stem + "_distance.csv");
    const fs::path pn = ctx.out / "tree" / (stem + ".nwk");
    write_text(pd, dist.str());
    write_text(pn, to_newick(upgma(d), digits) + "\n");
    r.artifacts.push_back(ctx.artifact(pn));
    r.artifacts.push_back(ctx.artifact(pd));
  };

  for (const auto& spec : trees) {
    const std::vector<int> layers = spec.layers.empty() ? table.layers() : spec.layers;
    for (int layer : layers) {
      const auto sigs = table.slice(layer, spec.category);
      if (sigs.size() < 2) {
        r.notes.push_back("tree " + cell_name(layer, spec.category) + ": fewer than 2 groups");
        continue;
      }
      emit(cell_name(layer, spec.category), cosine_distance_matrix(sigs), spec.precision);
    }
  }

  // Average trees over all non-excluded categories; a group missing from a
  // category sits at distance 1 from everyone in that category.
  const auto& excluded = cfg.tree_exclude_categories;
  std::vector<DistanceMatrix> everything;
  for (int layer : table.layers()) {
    std::vector<DistanceMatrix> per_layer;
    for (const auto& c : table.categories()) {
      if (std::find(excluded.begin(), excluded.end(), c) != excluded.end()) continue;
      const auto sigs = table.slice(layer, c);
      if (sigs.size() < 2) continue;
      per_layer.push_back(cosine_distance_matrix(sigs));
    }
    if (per_layer.empty()) continue;
    everything.insert(everything.end(), per_layer.begin(), per_layer.end());
    emit("average_L" + std::to_string(layer), average_distance(per_layer, table.groups()), precision);
  }
  if (!everything.empty()) emit("average", average_distance(everything, table.groups()), precision);

  write_stamp(ctx, r);
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Ingest: return "ingest";
    case Stage::Profile: return "profile";
    case Stage::Covariance: return "covariance";
    case Stage::Decompose: return "decompose";
    case Stage::Signatures: return "signatures";
    case Stage::StatsTrend: return "stats-trend";
    case Stage::StatsCorrelate: return "stats-correlate";
    case Stage::StatsVarianceTest: return "stats-variance-test";
    case Stage::Tree: return "tree";
  }
  return "unknown";
}

Stage parse_stage(const std::string& name) {
  for (Stage s : pipeline_order())
    if (name == stage_name(s)) return s;
  throw Error(ErrorCode::Usage, "unknown stage '" + name + "'");
}

const std::vector<Stage>& pipeline_order() {
  static const std::vector<Stage> order{Stage::Ingest,     Stage::Profile,        Stage::Covariance,
                                        Stage::Decompose,  Stage::Signatures,     Stage::StatsTrend,
                                        Stage::StatsCorrelate, Stage::StatsVarianceTest, Stage::Tree};
  return order;
}

unsigned resolve_jobs(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("REPFACTOR_JOBS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::logic_error&) {
    }
    throw Error(ErrorCode::Usage, std::string("REPFACTOR_JOBS must be a positive integer, got '") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

PipelineConfig load_config(const fs::path& path) {
  const json doc = read_json(path);
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path f = p;
    return f.is_relative() ? base / f : f;
  };

  PipelineConfig c;
  try {
    c.manifest_path = resolve(doc.at("manifest").get<std::string>());
    c.output_dir = resolve(doc.at("output_dir").get<std::string>());
    if (doc.contains("solver")) {
      const auto& s = doc["solver"];
      c.solver.rank = s.value("rank", c.solver.rank);
      c.solver.max_sweeps = s.value("max_sweeps", c.solver.max_sweeps);
      c.solver.rel_tol = s.value("rel_tol", c.solver.rel_tol);
      c.solver.seed = s.value("seed", c.solver.seed);
      if (s.contains("init")) c.solver.init = parse_init_method(s["init"].get<std::string>());
    }
    c.center = doc.value("center", c.center);
    c.normalize = doc.value("normalize", c.normalize);
    c.case_fold_lemmas = doc.value("case_fold_lemmas", c.case_fold_lemmas);
    c.layers = doc.value("layers", c.layers);
    c.categories = doc.value("categories", c.categories);
    c.jobs = doc.value("jobs", c.jobs);
    if (doc.contains("tree_exclude_categories"))
      c.tree_exclude_categories = doc["tree_exclude_categories"].get<std::vector<std::string>>();

    if (doc.contains("analyses")) {
      c.analyses_configured = true;
      for (const auto& a : doc["analyses"]) {
        const auto type = a.at("type").get<std::string>();
        if (type == "trend") {
          c.trends.push_back({a.value("category", "ALL"), a.value("alpha", 0.05), a.value("q", 0.05)});
        } else if (type == "property_correlation") {
          PropertyCorrelationSpec p;
          p.property = parse_property(a.at("property").get<std::string>());
          if (a.contains("layer")) p.layer = a["layer"].get<int>();
          p.category = a.value("category", "ALL");
          c.property_correlations.push_back(p);
        } else if (type == "variance_test") {
          VarianceTestSpec v;
          v.layer = a.at("layer").get<int>();
          v.category = a.value("category", "ALL");
          v.sample_groups = a.at("sample_groups").get<std::vector<std::string>>();
          v.reference_groups = a.at("reference_groups").get<std::vector<std::string>>();
          v.alternative = parse_alternative(a.value("alternative", "two_sided"));
          c.variance_tests.push_back(v);
        } else if (type == "tree") {
          TreeSpec t;
          t.layers = a.value("layers", t.layers);
          t.category = a.value("category", t.category);
          t.precision = a.value("precision", t.precision);
          c.trees.push_back(t);
        } else if (type == "external_correlation") {
          ExternalCorrelationSpec e;
          if (a.contains("layer")) e.layer = a["layer"].get<int>();
          e.category = a.value("category", e.category);
          e.tasks = a.value("tasks", e.tasks);
          c.external_correlations.push_back(e);
        } else {
          throw Error(ErrorCode::Usage, path.string() + ": unknown analysis type '" + type + "'");
        }
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Usage, path.string() + ": " + e.what());
  }
  for (const auto& t : c.trends)
    if (!(t.q > 0 && t.q < 1) || !(t.alpha > 0 && t.alpha < 1))
      throw Error(ErrorCode::Usage, path.string() + ": alpha and q must lie in (0, 1)");
  for (const auto& t : c.trees)
    if (t.precision < 1 || t.precision > 17) throw Error(ErrorCode::Usage, "tree precision must be in [1, 17]");
  return c;
}

StageReport run_stage(const PipelineConfig& config, Stage stage) {
  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create output directory " + config.output_dir.string());
  const Context ctx{config, config.output_dir};
  try {
    switch (stage) {
      case Stage::Ingest: return stage_ingest(ctx);
      case Stage::Profile: return stage_profile(ctx);
      case Stage::Covariance: return stage_covariance(ctx);
      case Stage::Decompose: return stage_decompose(ctx);
      case Stage::Signatures: return stage_signatures(ctx);
      case Stage::StatsTrend: return stage_trend(ctx);
      case Stage::StatsCorrelate: return stage_correlate(ctx);
      case Stage::StatsVarianceTest: return stage_variance(ctx);
      case Stage::Tree: return stage_tree(ctx);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MissingStage) throw;
    throw Error(e.code(), std::string("stage ") + stage_name(stage) + ": " + e.detail());
  } catch (const fs::filesystem_error& e) {
    throw Error(ErrorCode::IoFailure, std::string("stage ") + stage_name(stage) + ": " + e.what());
  }
  throw Error(ErrorCode::Usage, "unknown stage");
}

std::vector<StageReport> run_pipeline(const PipelineConfig& config) {
  std::vector<StageReport> reports;
  for (Stage s : pipeline_order()) reports.push_back(run_stage(config, s));

  ordered_json summary;
  summary["stages"] = ordered_json::array();
  summary["artifacts"] = ordered_json::array();
  std::set<std::string> seen;
  for (const auto& r : reports) {
    summary["stages"].push_back({{"stage", stage_name(r.stage)}, {"key", r.key}, {"notes", r.notes}});
    for (const auto& a : r.artifacts)
      if (seen.insert(a.path).second) summary["artifacts"].push_back({{"path", a.path}, {"sha256", a.sha256}});
  }
  write_text(config.output_dir / "summary.json", summary.dump(2) + "\n");
  return reports;
}

}  // namespace repfactor
