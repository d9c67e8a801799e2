#pragma once

// Batch pipeline: ingest -> profile -> covariance -> decompose -> signatures
// -> stats (trend, correlate, variance-test) -> tree.
//
// Every stage writes a stamp (output_dir/stamps/<stage>.json) holding a key
// derived from its inputs and options plus the SHA-256 of each artifact. A
// stage whose key and artifacts are unchanged is skipped. Covariance slices
// and fitted models live in content-addressed cache directories, so changing
// solver options reuses the slices.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "repfactor/parafac2.hpp"
#include "repfactor/stats.hpp"

namespace repfactor {

enum class Stage { Ingest, Profile, Covariance, Decompose, Signatures, StatsTrend, StatsCorrelate, StatsVarianceTest, Tree };

const char* stage_name(Stage s);
Stage parse_stage(const std::string& name);
const std::vector<Stage>& pipeline_order();

struct TrendSpec {
  std::string category = "ALL";
  double alpha = 0.05;
  double q = 0.05;
};

struct PropertyCorrelationSpec {
  GroupProperty property = GroupProperty::UniqueChars;
  std::optional<int> layer;  // all layers when unset
  std::string category = "ALL";
};

struct VarianceTestSpec {
  int layer = 0;
  std::string category = "ALL";
  std::vector<std::string> sample_groups;
  std::vector<std::string> reference_groups;
  Alternative alternative = Alternative::TwoSided;
};

struct TreeSpec {
  std::vector<int> layers;  // all layers when empty
  std::string category = "ALL";
  int precision = 6;
};

struct ExternalCorrelationSpec {
  std::optional<int> layer;  // final layer when unset
  std::string category = "ALL";
  std::vector<std::string> tasks;  // all tasks when empty
};

struct PipelineConfig {
  std::filesystem::path manifest_path;
  std::filesystem::path output_dir;
  SolverOptions solver;
  bool center = true;
  bool normalize = false;
  bool case_fold_lemmas = false;
  std::vector<int> layers;               // restrict decompositions; all when empty
  std::vector<std::string> categories;   // likewise
  std::vector<std::string> tree_exclude_categories{"POS"};
  unsigned jobs = 0;                     // 0: REPFACTOR_JOBS or hardware threads

  // Analyses. When none are configured, defaults are derived from the data.
  bool analyses_configured = false;
  std::vector<TrendSpec> trends;
  std::vector<PropertyCorrelationSpec> property_correlations;
  std::vector<VarianceTestSpec> variance_tests;
  std::vector<TreeSpec> trees;
  std::vector<ExternalCorrelationSpec> external_correlations;
};

/// Parses the JSON config; relative paths resolve against its directory.
PipelineConfig load_config(const std::filesystem::path& path);

struct Artifact {
  std::string path;  // relative to output_dir
  std::string sha256;
};

struct StageReport {
  Stage stage = Stage::Ingest;
  std::string key;
  bool up_to_date = false;
  std::vector<Artifact> artifacts;
  std::vector<std::string> notes;
};

StageReport run_stage(const PipelineConfig& config, Stage stage);

/// Runs every stage in order and writes output_dir/summary.json.
std::vector<StageReport> run_pipeline(const PipelineConfig& config);

unsigned resolve_jobs(unsigned requested);

}  // namespace repfactor
