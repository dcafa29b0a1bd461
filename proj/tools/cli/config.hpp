#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cli/csv.hpp"
#include "json.hpp"
#include "vcgate/nulldist.hpp"
#include "vcgate/pql.hpp"

namespace vcgate::cli {

/// A fixed-effect column; text columns expand to indicators.
struct FixedColumn {
  std::string column;
  /// Level order for a text column; empty means order of first appearance.
  std::vector<std::string> levels;
};

/// Random term: a grouping column (indicator Z) or a smooth of a covariate.
struct RandomSpec {
  std::string name;
  std::string group;
  std::string smooth;
  int K = 30;
};

struct ModelConfig {
  std::string response;
  /// Column of trial counts for binomial data given as successes.
  std::string denominator_column;
  std::string family = "normal";
  int denominator = 1;
  bool intercept = true;
  std::vector<FixedColumn> fixed;
  std::vector<RandomSpec> random;
  std::string test;
  nulldist::NullKind null_kind = nulldist::NullKind::finite_sample;
  int B = nulldist::kDefaultNullSamples;
  std::uint64_t seed = 1;
};

ModelConfig parse_model_config(const nlohmann::json& j);
ModelConfig read_model_config(const std::string& path);

struct LoadedModel {
  pql::GlmmSpec spec;
  Eigen::VectorXd y;
  std::size_t tested_index = 0;
  std::vector<std::string> fixed_names;
  std::size_t n_rows = 0;
};

/// Expands the configured columns into a GLMM; referenced columns must exist
/// and hold no missing values.
LoadedModel build_model(const Table& table, const ModelConfig& config);

nulldist::NullKind parse_null_kind(const std::string& name);

}  // namespace vcgate::cli
