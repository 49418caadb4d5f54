#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "flatlab/config.hpp"
#include "flatlab/csv.hpp"
#include "flatlab/theory_fp.hpp"
#include "flatlab/theory_replicated.hpp"
#include "flatlab/theory_rs.hpp"
#include "flatlab/trainer.hpp"

namespace flatlab {

namespace exit_code {
constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kConvergence = 2;
constexpr int kComparison = 3;
}  // namespace exit_code

std::string version_string();

struct RunOptions {
    std::optional<std::uint64_t> seed;
    int threads = 1;
    std::optional<std::string> out_dir;
};

struct RunOutcome {
    int exit_code = exit_code::kOk;
    std::string out_dir;
    std::vector<std::string> artifacts;  // file names relative to out_dir
    std::vector<std::string> messages;
};

// Every violation in the config, empty when valid.
std::vector<std::string> validate_config(const Config& cfg);

RunOutcome run_experiment(const Config& cfg, const RunOptions& opts, const std::string& default_out_dir);
RunOutcome run_config_file(const std::string& path, const RunOptions& opts);

// Threads from the flag, else FLATLAB_THREADS, else 1.
int resolve_threads(std::optional<int> flag);

// CSV tables with the module schemas.
CsvTable rs_table(const std::vector<RsRow>& rows);
CsvTable replicated_table(const std::vector<ReplicatedRow>& rows);
CsvTable trajectory_table(const std::vector<TrajectoryRow>& rows);

struct FpTableRow {
    double alpha, delta, rho, lambda_r, b;
    std::string cutoff_policy;
    FpCurvePoint point;
};
CsvTable fp_table(const std::vector<FpTableRow>& rows);

// rSGD measurements in the replicated schema.
struct SimReplicaRow {
    std::uint64_t seed;
    ReplicatedRow row;
};
ReplicatedRow measure_ensemble(const Dataset& data, const ReplicaEnsemble& e, int y, double cos_theta, double norm);

int compare_files(const std::string& a, const std::string& b, const std::string& tol_spec,
                  const std::vector<std::string>& keys, std::ostream& out, const std::string& report_path = "");

}  // namespace flatlab
