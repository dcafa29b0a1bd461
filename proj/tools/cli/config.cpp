#include "cli/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "vcgate/errors.hpp"
#include "vcgate/splines.hpp"

namespace vcgate::cli {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

Error config_error(const std::string& msg) { return Error(ErrorKind::invalid_input, msg); }

std::vector<std::string> level_order(const std::vector<std::string>& values,
                                     const std::vector<std::string>& given) {
  std::vector<std::string> levels = given;
  if (levels.empty()) {
    for (const auto& v : values)
      if (std::find(levels.begin(), levels.end(), v) == levels.end()) levels.push_back(v);
  }
  for (const auto& v : values)
    if (std::find(levels.begin(), levels.end(), v) == levels.end())
      throw Error(ErrorKind::ingestion, "value '" + v + "' is not among the listed levels");
  return levels;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

nulldist::NullKind parse_null_kind(const std::string& name) {
  if (name == "finite" || name == "finite_sample") return nulldist::NullKind::finite_sample;
  if (name == "mixture" || name == "chisq_mixture") return nulldist::NullKind::chisq_mixture;
  throw config_error("unknown null kind '" + name + "' (expected finite or mixture)");
}

ModelConfig parse_model_config(const json& j) {
  try {
    if (!j.is_object()) throw config_error("model config must be a JSON object");
    ModelConfig c;
    c.response = j.at("response").get<std::string>();
    c.denominator_column = get_or<std::string>(j, "denominator_column", "");
    c.family = get_or<std::string>(j, "family", "normal");
    c.denominator = get_or<int>(j, "denominator", 1);
    c.intercept = get_or<bool>(j, "intercept", true);
    for (const auto& f : j.value("fixed", json::array())) {
      if (f.is_string()) {
        c.fixed.push_back({f.get<std::string>(), {}});
      } else {
        c.fixed.push_back({f.at("column").get<std::string>(),
                           f.value("levels", std::vector<std::string>{})});
      }
    }
    for (const auto& r : j.at("random")) {
      RandomSpec s;
      s.group = get_or<std::string>(r, "group", "");
      s.smooth = get_or<std::string>(r, "smooth", "");
      s.K = get_or<int>(r, "K", 30);
      if (s.group.empty() == s.smooth.empty())
        throw config_error("each random term needs exactly one of 'group' or 'smooth'");
      s.name = get_or<std::string>(r, "name", s.group.empty() ? "smooth(" + s.smooth + ")" : s.group);
      c.random.push_back(std::move(s));
    }
    if (c.random.empty()) throw config_error("model config lists no random terms");
    c.test = j.at("test").get<std::string>();
    const auto n_tested = std::count_if(c.random.begin(), c.random.end(),
                                        [&](const RandomSpec& s) { return s.name == c.test; });
    if (n_tested != 1) throw config_error("'test' must name exactly one random term: '" + c.test + "'");
    if (j.contains("null")) c.null_kind = parse_null_kind(j.at("null").get<std::string>());
    c.B = get_or<int>(j, "B", nulldist::kDefaultNullSamples);
    c.seed = get_or<std::uint64_t>(j, "seed", 1);
    if (c.B < 1) throw config_error("B must be >= 1");
    return c;
  } catch (const json::exception& e) {
    throw config_error(std::string("invalid model config: ") + e.what());
  }
}

ModelConfig read_model_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ingestion, "cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw config_error("cannot parse '" + path + "': " + e.what());
  }
  return parse_model_config(j);
}

LoadedModel build_model(const Table& table, const ModelConfig& c) {
  const std::size_t n = table.n_rows();
  if (n == 0) throw Error(ErrorKind::ingestion, "dataset has no rows");
  LoadedModel out;
  out.n_rows = n;

  // Response, converted to proportions for binomial counts.
  const auto raw = table.numeric(c.response);
  out.y = Eigen::Map<const VectorXd>(raw.data(), static_cast<Eigen::Index>(n));
  int denominator = c.denominator;
  if (!c.denominator_column.empty()) {
    const auto d = table.numeric(c.denominator_column);
    const double d0 = d.front();
    for (std::size_t i = 0; i < n; ++i)
      if (d[i] != d0)
        throw Error(ErrorKind::ingestion, "denominator column '" + c.denominator_column +
                                              "' must be constant; row " + std::to_string(i + 1) + " differs");
    if (d0 < 1 || d0 != std::round(d0))
      throw Error(ErrorKind::ingestion, "denominator must be a positive integer");
    denominator = static_cast<int>(d0);
    out.y /= d0;
  }
  const expfam::Family family = expfam::parse_family(c.family, denominator);

  // Fixed effects.
  std::vector<VectorXd> cols;
  if (c.intercept) {
    cols.push_back(VectorXd::Ones(static_cast<Eigen::Index>(n)));
    out.fixed_names.push_back("(Intercept)");
  }
  for (const auto& f : c.fixed) {
    if (!table.column(f.column))
      throw Error(ErrorKind::ingestion, "column '" + f.column + "' not found in dataset");
    if (table.is_numeric(f.column) && f.levels.empty()) {
      const auto v = table.numeric(f.column);
      cols.push_back(Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(n)));
      out.fixed_names.push_back(f.column);
      continue;
    }
    const auto values = table.text(f.column);
    const auto levels = level_order(values, f.levels);
    // With an intercept the first level is the reference.
    for (std::size_t l = c.intercept ? 1 : 0; l < levels.size(); ++l) {
      VectorXd ind = VectorXd::Zero(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i)
        if (values[i] == levels[l]) ind[static_cast<Eigen::Index>(i)] = 1.0;
      cols.push_back(ind);
      out.fixed_names.push_back(f.column + "[" + levels[l] + "]");
    }
  }
  if (cols.empty()) throw config_error("model has no fixed effects");
  MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) X.col(static_cast<Eigen::Index>(k)) = cols[k];

  // Random terms.
  std::vector<lmm::RandomTerm> randoms;
  for (std::size_t s = 0; s < c.random.size(); ++s) {
    const auto& r = c.random[s];
    if (r.name == c.test) out.tested_index = s;
    if (!r.group.empty()) {
      const auto values = table.text(r.group);
      const auto levels = level_order(values, {});
      std::map<std::string, Eigen::Index> index;
      for (std::size_t l = 0; l < levels.size(); ++l) index[levels[l]] = static_cast<Eigen::Index>(l);
      MatrixXd Z = MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(levels.size()));
      for (std::size_t i = 0; i < n; ++i) Z(static_cast<Eigen::Index>(i), index.at(values[i])) = 1.0;
      randoms.push_back({r.name, std::move(Z), MatrixXd()});
    } else {
      const auto t = table.numeric(r.smooth);
      const VectorXd tv = Eigen::Map<const VectorXd>(t.data(), static_cast<Eigen::Index>(n));
      const auto sd = splines::smooth_design(tv, splines::spec_for(tv, r.K));
      // The linear part of the smooth joins the fixed effects; the constant
      // part is the model intercept.
      MatrixXd Xa(X.rows(), X.cols() + 1);
      Xa << X, tv;
      X = std::move(Xa);
      out.fixed_names.push_back(r.smooth);
      randoms.push_back({r.name, sd.Z_smooth, sd.D});
    }
  }
  out.spec = pql::make_spec(family, lmm::LmmDesign(std::move(X), std::move(randoms)));
  return out;
}

}  // namespace vcgate::cli
