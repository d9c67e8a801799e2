#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "repfactor/error.hpp"
#include "repfactor/pipeline.hpp"
#include "repfactor/profile.hpp"
#include "repfactor/signatures.hpp"
#include "repfactor/synthetic.hpp"

using namespace repfactor;
namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::string config;
  std::optional<Index> rank;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::optional<int> max_sweeps;
  std::optional<double> q;
  std::optional<double> alpha;
  std::optional<int> layer;
  std::optional<std::string> category;
  std::optional<unsigned> jobs;
  bool case_fold = false;
  bool quiet = false;
  bool verbose = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "pipeline config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--rank", o.rank, "number of components k")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "solver seed");
  cmd->add_option("--tol", o.tol, "relative convergence tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--max-sweeps", o.max_sweeps, "ALS sweep budget")->check(CLI::PositiveNumber);
  cmd->add_option("--q", o.q, "FDR level")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--alpha", o.alpha, "per-test significance level")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--layer", o.layer, "restrict to one layer");
  cmd->add_option("--category", o.category, "restrict to one category");
  cmd->add_option("-j,--jobs", o.jobs, "parallel decompositions (default: $REPFACTOR_JOBS or all cores)")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--case-fold", o.case_fold, "case-fold lemmas before counting types");
  cmd->add_flag("--quiet", o.quiet, "print nothing on success");
  cmd->add_flag("-v,--verbose", o.verbose, "also list cached slice and model files");
}

PipelineConfig configure(const Overrides& o) {
  PipelineConfig c = load_config(o.config);
  if (o.rank) c.solver.rank = *o.rank;
  if (o.seed) c.solver.seed = *o.seed;
  if (o.tol) c.solver.rel_tol = *o.tol;
  if (o.max_sweeps) c.solver.max_sweeps = *o.max_sweeps;
  if (o.jobs) c.jobs = *o.jobs;
  if (o.case_fold) c.case_fold_lemmas = true;
  for (auto& t : c.trends) {
    if (o.q) t.q = *o.q;
    if (o.alpha) t.alpha = *o.alpha;
  }
  if (o.layer) {
    c.layers = {*o.layer};
    for (auto& p : c.property_correlations) p.layer = *o.layer;
    for (auto& e : c.external_correlations) e.layer = *o.layer;
    for (auto& v : c.variance_tests) v.layer = *o.layer;
    for (auto& t : c.trees) t.layers = {*o.layer};
  }
  if (o.category) {
    c.categories = {*o.category};
    if (!c.trends.empty()) c.trends.resize(1);
    for (auto& t : c.trends) t.category = *o.category;
    for (auto& p : c.property_correlations) p.category = *o.category;
    for (auto& e : c.external_correlations) e.category = *o.category;
    for (auto& v : c.variance_tests) v.category = *o.category;
    for (auto& t : c.trees) t.category = *o.category;
  }
  return c;
}

void report(const StageReport& r, const Overrides& o) {
  if (o.quiet) return;
  std::cout << stage_name(r.stage) << (r.up_to_date ? " (up to date)" : "") << '\n';
  for (const auto& n : r.notes) std::cout << "  note: " << n << '\n';
  std::size_t cached = 0;
  for (const auto& a : r.artifacts) {
    if (!o.verbose && a.path.starts_with("cache/")) {
      ++cached;
      continue;
    }
    std::cout << "  " << a.sha256.substr(0, 12) << "  " << a.path << '\n';
  }
  if (cached) std::cout << "  (" << cached << " cached files)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"repfactor: PARAFAC2 signatures of experiment/control representation pairs"};
  app.require_subcommand(1);

  Overrides o;
  std::optional<Stage> stage;
  bool full = false;

  auto stage_cmd = [&](const std::string& name, Stage s, const std::string& help, CLI::App* parent) {
    CLI::App* cmd = parent->add_subcommand(name, help);
    add_common(cmd, o);
    cmd->callback([&, s] { stage = s; });
    return cmd;
  };

  stage_cmd("ingest", Stage::Ingest, "validate the manifest and hash every input", &app);
  CLI::App* profile = app.add_subcommand("profile", "compute group profiles from corpora");
  add_common(profile, o);
  profile->get_option("--config")->required(false);
  std::string corpus, group;
  profile->add_option("--corpus", corpus, "profile a single token<TAB>lemma file and print it")
      ->check(CLI::ExistingFile)
      ->excludes("--config");
  profile->add_option("--group", group, "group label for --corpus");
  profile->callback([&] {
    if (corpus.empty() && o.config.empty()) throw CLI::ValidationError("profile", "need --config or --corpus");
    if (corpus.empty()) stage = Stage::Profile;
  });
  stage_cmd("covariance", Stage::Covariance, "build cross-covariance slices", &app);
  stage_cmd("decompose", Stage::Decompose, "fit PARAFAC2 per (layer, category)", &app);
  stage_cmd("signatures", Stage::Signatures, "extract the signature table", &app);
  CLI::App* stats = app.add_subcommand("stats", "statistical analyses");
  stats->require_subcommand(1);
  stage_cmd("trend", Stage::StatsTrend, "Mann-Kendall trends over layers with BH correction", stats);
  stage_cmd("correlate", Stage::StatsCorrelate, "correlate signatures with group properties", stats);
  stage_cmd("variance-test", Stage::StatsVarianceTest, "chi-square test of signature variance", stats);
  stage_cmd("tree", Stage::Tree, "UPGMA trees from cosine distances", &app);
  CLI::App* pipe = app.add_subcommand("pipeline", "run every stage in order");
  add_common(pipe, o);
  pipe->callback([&] { full = true; });

  CLI::App* synth = app.add_subcommand("synth", "write the bundled synthetic dataset");
  std::string synth_out;
  SyntheticDatasetOptions synth_opts;
  synth->add_option("--out", synth_out, "target directory")->required();
  synth->add_option("--seed", synth_opts.seed, "generator seed");
  synth->add_option("--layers", synth_opts.layers, "number of layers")->check(CLI::Range(2, 1000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) {
      write_synthetic_dataset(synth_out, synth_opts);
      std::cout << (fs::path(synth_out) / "config.json").string() << '\n';
      return 0;
    }
    if (profile->parsed() && !corpus.empty()) {
      ProfileOptions popts;
      popts.case_fold_lemmas = o.case_fold;
      LanguageProfile p = profile_corpus(read_corpus(corpus), popts);
      std::cout << "group,unique_chars,ttr,data_size\n"
                << (group.empty() ? fs::path(corpus).stem().string() : group) << ',' << p.unique_chars << ','
                << format_exact(p.ttr) << ',' << p.data_size << '\n';
      return 0;
    }
    const PipelineConfig config = configure(o);
    if (full) {
      for (const auto& r : run_pipeline(config)) report(r, o);
      if (!o.quiet) std::cout << "summary: " << (config.output_dir / "summary.json").string() << '\n';
    } else {
      report(run_stage(config, *stage), o);
    }
  } catch (const Error& e) {
    std::cerr << "repfactor: " << e.what() << '\n';
    return exit_status(e.code());
  } catch (const std::exception& e) {
    std::cerr << "repfactor: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
