#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <json.hpp>

#include "corners/construction.hpp"
#include "corners/groups.hpp"
#include "corners/kernel.hpp"
#include "corners/optimizer.hpp"
#include "corners/regularity.hpp"

namespace corners {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);

// path "-" means stdin / stdout
std::string read_input(const std::string& path);
void write_output(const std::string& path, const std::string& bytes);

// Kernel files: {"p": [...], "q": [...], "r": [...], "values": [[[...]]]},
// piecewise variant carries "x_cuts"/"y_cuts"/"z_cuts" instead of marginals.
nlohmann::json kernel_to_json(const DiscreteKernel& k);
nlohmann::json piecewise_to_json(const PiecewiseKernel& pk);
bool json_is_piecewise(const nlohmann::json& j);
DiscreteKernel kernel_from_json(const nlohmann::json& j);
PiecewiseKernel piecewise_from_json(const nlohmann::json& j);
nlohmann::json parse_json(const std::string& text);  // ValidationError with line info

// PlaneSet text format: "group: <descriptor>" then N rows of N '0'/'1' chars.
std::string planeset_to_text(const PlaneSet& A);
PlaneSet planeset_from_text(const std::string& text);

std::string census_to_csv(const CornerCensus& c);
std::string census_counts_to_csv(std::span<const std::int64_t> counts);

nlohmann::json optimize_report_to_json(const OptimizeReport& rep);
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

nlohmann::json construction_report_to_json(const ConstructionReport& rep);
std::string census_density_csv(const CornerCensus& c);  // d, |S_d|/N^2

nlohmann::json boxing_to_json(const Boxing& bx);
nlohmann::json regularity_outcome_to_json(const RegularityOutcome& out);
std::string trajectory_to_csv(const std::vector<TrajectoryStep>& steps);

struct RunManifest {
    std::string subcommand;
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> input_hashes;
    double duration_ms = 0.0;
};

nlohmann::json manifest_to_json(const RunManifest& m);

}  // namespace corners
