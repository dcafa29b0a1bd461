#include "cli/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "cli/config.hpp"
#include "cli/csv.hpp"
#include "vcgate/errors.hpp"

namespace vcgate::cli {

using nlohmann::json;

namespace {

json to_array(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

int exit_for(const Error& e) {
  return e.kind() == ErrorKind::non_convergence ? exit_nonconvergence : exit_model;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::invalid_input, "cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw Error(ErrorKind::invalid_input, "write failed for '" + path.string() + "'");
}

vctest::Method parse_method(const std::string& name) {
  if (name == "aRLRT" || name == "arlrt") return vctest::Method::arlrt;
  if (name == "as-aRLRT" || name == "as_arlrt") return vctest::Method::as_arlrt;
  throw Error(ErrorKind::invalid_input, "unknown method '" + name + "'");
}

sim::SimScenario parse_scenario(const json& j, const json& defaults) {
  json m = defaults;
  for (const auto& [k, v] : j.items()) m[k] = v;
  sim::SimScenario s;
  s.model = sim::parse_model(m.at("model").get<std::string>());
  s.family = expfam::parse_family(m.value("family", std::string("normal")), m.value("denominator", 4));
  s.n = m.at("n").get<int>();
  s.m = m.at("m").get<int>();
  s.effect = m.value("effect", 0.0);
  s.nuisance = m.value("nuisance", 1.0);
  s.beta0 = m.value("beta0", 0.0);
  s.beta1 = m.value("beta1", 1.0);
  s.replicates = m.value("replicates", 1000);
  s.alpha = m.value("alpha", 0.05);
  s.seed = m.value("seed", std::uint64_t{1});
  s.B = m.value("B", 2000);
  s.K = m.value("K", 30);
  return s;
}

}  // namespace

json result_to_json(const vctest::TestResult& r, const std::vector<std::string>& fixed_names,
                    const std::vector<std::string>& random_names) {
  json beta = json::object();
  for (std::size_t k = 0; k < fixed_names.size(); ++k) beta[fixed_names[k]] = r.pql.beta[static_cast<Eigen::Index>(k)];
  json vc = json::object();
  const Eigen::VectorXd comps = r.pql.variance_components();
  for (std::size_t s = 0; s < random_names.size(); ++s) vc[random_names[s]] = comps[static_cast<Eigen::Index>(s)];

  json j;
  j["schema_version"] = kSchemaVersion;
  j["method"] = vctest::to_string(r.method);
  j["statistic"] = r.statistic;
  j["p_value"] = r.p_value;
  j["null"] = {{"kind", nulldist::to_string(r.null_distribution.kind)},
               {"B", r.null_distribution.B},
               {"seed", r.null_distribution.seed},
               {"zero_fraction", r.null_distribution.zero_fraction}};
  j["estimates"] = {{"beta", beta},
                    {"variance_components", vc},
                    {"dispersion", r.pql.dispersion}};
  j["pql"] = {{"iterations", r.pql.iterations}, {"converged", r.pql.converged}, {"clamped", r.pql.clamped}};
  j["working_fits"] = {{"null", {{"rel", r.null_fit.rel}, {"ratios", to_array(r.null_fit.ratios)}}},
                       {"alternative", {{"rel", r.alt_fit.rel}, {"ratios", to_array(r.alt_fit.ratios)}}}};
  j["warnings"] = r.warnings;
  return j;
}

json table_to_json(const sim::SimTable& table) {
  json rows = json::array();
  for (const auto& r : table.rows) {
    const auto& s = r.scenario;
    rows.push_back({{"model", sim::to_string(s.model)},
                    {"family", s.family.name()},
                    {"denominator", s.family.denominator()},
                    {"n", s.n},
                    {"m", s.m},
                    {"effect", s.effect},
                    {"nuisance", s.nuisance},
                    {"beta0", s.beta0},
                    {"beta1", s.beta1},
                    {"alpha", s.alpha},
                    {"seed", s.seed},
                    {"B", s.B},
                    {"K", s.K},
                    {"method", vctest::to_string(r.method)},
                    {"replicates", r.replicates},
                    {"rejections", r.rejections},
                    {"rate", r.rate},
                    {"se", r.se},
                    {"failures", r.failures},
                    {"nonconverged", r.nonconverged},
                    {"seconds", r.seconds}});
  }
  return rows;
}

Manifest parse_manifest(const json& j, const std::string& profile) {
  if (profile != "desk" && profile != "paper")
    throw Error(ErrorKind::invalid_input, "profile must be desk or paper");
  try {
    Manifest m;
    m.name = j.value("name", std::string("simulation"));
    m.kind = j.value("kind", std::string("type1"));
    if (m.kind != "type1" && m.kind != "power")
      throw Error(ErrorKind::invalid_input, "manifest kind must be type1 or power");
    for (const auto& name : j.value("methods", std::vector<std::string>{"aRLRT", "as-aRLRT"}))
      m.methods.push_back(parse_method(name));
    const json defaults = j.value("defaults", json::object());
    for (const auto& s : j.at("scenarios")) {
      auto sc = parse_scenario(s, defaults);
      if (profile == "paper")
        sc.replicates = sc.effect == 0.0 ? kPaperType1Replicates : kPaperPowerReplicates;
      m.scenarios.push_back(sc);
    }
    if (m.scenarios.empty()) throw Error(ErrorKind::invalid_input, "manifest lists no scenarios");
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::invalid_input, std::string("invalid manifest: ") + e.what());
  }
}

int cmd_test(const TestOptions& o, std::ostream& out, std::ostream& err) {
  try {
    ModelConfig config = read_model_config(o.config);
    if (o.seed) config.seed = *o.seed;
    if (o.null_kind) config.null_kind = parse_null_kind(*o.null_kind);
    if (o.B) {
      if (*o.B < 1) throw Error(ErrorKind::invalid_input, "B must be >= 1");
      config.B = *o.B;
    }
    const Table table = read_csv(o.data);
    const LoadedModel model = build_model(table, config);

    vctest::TestProblem problem;
    problem.spec = model.spec;
    problem.y = model.y;
    problem.tested_index = model.tested_index;
    problem.null_kind = config.null_kind;
    problem.B = config.B;
    problem.seed = config.seed;
    problem.threads = o.threads;
    const vctest::TestResult result = vctest::run_test(problem);

    std::vector<std::string> random_names;
    for (const auto& r : config.random) random_names.push_back(r.name);
    json report = result_to_json(result, model.fixed_names, random_names);
    report["data"] = {{"n_obs", model.n_rows}, {"response", config.response},
                      {"family", model.spec.family.name()}, {"test", config.test}};
    const std::string text = report.dump(2) + "\n";
    const bool to_stdout = o.out.empty() || o.out == "-";
    if (to_stdout)
      out << text;
    else
      write_file(o.out, text);

    std::ostream& summary = to_stdout ? err : out;
    summary << std::setprecision(6) << vctest::to_string(result.method) << " test of '" << config.test
        << "': statistic = " << result.statistic << ", p = " << result.p_value << " ("
        << nulldist::to_string(result.null_distribution.kind);
    if (result.null_distribution.kind == nulldist::NullKind::finite_sample)
      summary << ", B = " << result.null_distribution.B << ", seed = " << result.null_distribution.seed;
    summary << ")\n";
    for (const auto& w : result.warnings) err << "warning: " << w << "\n";
    return exit_ok;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_for(e);
  }
}

int cmd_simulate(const SimulateOptions& o, std::ostream& out, std::ostream& err) {
  try {
    std::ifstream in(o.manifest);
    if (!in) throw Error(ErrorKind::ingestion, "cannot open '" + o.manifest + "'");
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw Error(ErrorKind::invalid_input, "cannot parse manifest: " + std::string(e.what()));
    }
    Manifest m = parse_manifest(j, o.profile);
    for (auto& s : m.scenarios) {
      if (o.seed) s.seed = *o.seed;
      if (o.B) s.B = *o.B;
    }

    sim::RunOptions run;
    run.methods = m.methods;
    run.threads = o.threads;
    if (!o.quiet) {
      run.progress = [&err](const sim::SimScenario& s, int done, int total) {
        if (done == total || done % 100 == 0)
          err << "\r" << s.label() << ": " << done << "/" << total << (done == total ? "\n" : "") << std::flush;
      };
    }
    const sim::SimTable table = m.kind == "power" ? sim::run_power(m.scenarios, run)
                                                  : sim::run_type1(m.scenarios, run);

    std::filesystem::create_directories(o.out_dir);
    const std::filesystem::path dir(o.out_dir);
    write_file(dir / (m.name + ".csv"), sim::to_csv(table));
    json report;
    report["schema_version"] = kSchemaVersion;
    report["name"] = m.name;
    report["kind"] = m.kind;
    report["profile"] = o.profile;
    report["replicate_counts"] = o.profile == "paper"
        ? json{{"type1", kPaperType1Replicates}, {"power", kPaperPowerReplicates}}
        : json{{"type1", "manifest"}, {"power", "manifest"}};
    report["rows"] = table_to_json(table);
    write_file(dir / (m.name + ".json"), report.dump(2) + "\n");

    for (const auto& r : table.rows)
      out << sim::to_string(r.scenario.model) << ' ' << r.scenario.family.name() << " n=" << r.scenario.n
          << " m=" << r.scenario.m << " effect=" << r.scenario.effect << ' ' << vctest::to_string(r.method)
          << ": rate " << std::fixed << std::setprecision(4) << r.rate << " (se " << r.se << ", failures "
          << r.failures << ")" << std::defaultfloat << "\n";
    return exit_ok;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_for(e);
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  }
}

int cmd_standins(const std::string& out_dir, std::ostream& out, std::ostream& err) {
  try {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    std::ostringstream sal;
    sal << "fem_id,male_id,cross,y\n";
    for (const auto& r : sim::salamander_standin()) sal << r.female << ',' << r.male << ',' << r.cross << ',' << r.mated << '\n';
    write_file(dir / "salamander.csv", sal.str());

    std::ostringstream rikz;
    rikz << "sample,beach,NAP,richness\n" << std::fixed << std::setprecision(3);
    for (const auto& r : sim::rikz_standin()) rikz << r.sample << ',' << r.beach << ',' << r.nap << ',' << r.richness << '\n';
    write_file(dir / "rikz.csv", rikz.str());
    out << "wrote " << (dir / "salamander.csv").string() << " and " << (dir / "rikz.csv").string() << "\n";
    return exit_ok;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  }
}

}  // namespace vcgate::cli
