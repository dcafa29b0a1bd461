#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vcgate/simharness.hpp"
#include "vcgate/vctest.hpp"

namespace vcgate::cli {

inline constexpr int kSchemaVersion = 1;

enum ExitCode : int { exit_ok = 0, exit_usage = 2, exit_model = 2, exit_nonconvergence = 3 };

struct TestOptions {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> null_kind;
  std::optional<int> B;
  int threads = 1;
};

struct SimulateOptions {
  std::string manifest;
  std::string out_dir;
  std::string profile = "desk";
  std::optional<std::uint64_t> seed;
  std::optional<int> B;
  int threads = 1;
  bool quiet = false;
};

/// Report for one test; every number is copied from the result unrounded.
nlohmann::json result_to_json(const vctest::TestResult& result, const std::vector<std::string>& fixed_names,
                              const std::vector<std::string>& random_names);

nlohmann::json table_to_json(const sim::SimTable& table);

struct Manifest {
  std::string name;
  std::string kind = "type1";  // or "power"
  std::vector<sim::SimScenario> scenarios;
  std::vector<vctest::Method> methods;
};

/// Replicate counts switch with the profile: "desk" keeps the manifest's
/// counts, "paper" uses 5000 for size rows and 1000 for power rows.
Manifest parse_manifest(const nlohmann::json& j, const std::string& profile);

int cmd_test(const TestOptions& options, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateOptions& options, std::ostream& out, std::ostream& err);
int cmd_standins(const std::string& out_dir, std::ostream& out, std::ostream& err);

inline constexpr int kPaperType1Replicates = 5000;
inline constexpr int kPaperPowerReplicates = 1000;

}  // namespace vcgate::cli
