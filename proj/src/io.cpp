#include "corners/io.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "corners/errors.hpp"
#include "corners/rng.hpp"

namespace corners {

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string fnv1a64_hex(std::string_view bytes) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

std::string read_input(const std::string& path) {
    if (path == "-") {
        std::ostringstream ss;
        ss << std::cin.rdbuf();
        return ss.str();
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open input file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_output(const std::string& path, const std::string& bytes) {
    if (path == "-") {
        std::cout << bytes;
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open output file: " + path);
    out << bytes;
}

nlohmann::json parse_json(const std::string& text) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        // translate the byte offset into a line number
        std::size_t line = 1;
        for (std::size_t i = 0; i < text.size() && i + 1 < e.byte; ++i)
            if (text[i] == '\n') ++line;
        throw ValidationError("JSON parse error near line " + std::to_string(line) + ": " + e.what());
    }
}

namespace {

std::vector<double> doubles_from(const nlohmann::json& j, const char* field) {
    if (!j.contains(field)) throw ValidationError(std::string("kernel file is missing field '") + field + "'");
    try {
        return j.at(field).get<std::vector<double>>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError(std::string("field '") + field + "' is not an array of numbers");
    }
}

std::vector<double> tensor_from(const nlohmann::json& j, std::size_t mx, std::size_t my,
                                std::size_t mz) {
    if (!j.contains("values")) throw ValidationError("kernel file is missing field 'values'");
    const auto& v = j.at("values");
    if (!v.is_array() || v.size() != mx)
        throw ValidationError("'values' must be a nested array of shape [" + std::to_string(mx) +
                              "][" + std::to_string(my) + "][" + std::to_string(mz) + "]");
    std::vector<double> out;
    out.reserve(mx * my * mz);
    for (std::size_t i = 0; i < mx; ++i) {
        const auto& vi = v.at(i);
        if (!vi.is_array() || vi.size() != my) throw ValidationError("'values' row has wrong length");
        for (std::size_t jj = 0; jj < my; ++jj) {
            const auto& vij = vi.at(jj);
            if (!vij.is_array() || vij.size() != mz)
                throw ValidationError("'values' column has wrong length");
            for (std::size_t k = 0; k < mz; ++k) {
                if (!vij.at(k).is_number()) throw ValidationError("'values' entry is not a number");
                out.push_back(vij.at(k).get<double>());
            }
        }
    }
    return out;
}

nlohmann::json tensor_to_json(const std::vector<double>& values, std::size_t mx, std::size_t my,
                              std::size_t mz) {
    nlohmann::json v = nlohmann::json::array();
    for (std::size_t i = 0; i < mx; ++i) {
        nlohmann::json vi = nlohmann::json::array();
        for (std::size_t j = 0; j < my; ++j) {
            nlohmann::json vij = nlohmann::json::array();
            for (std::size_t k = 0; k < mz; ++k) vij.push_back(values[(i * my + j) * mz + k]);
            vi.push_back(std::move(vij));
        }
        v.push_back(std::move(vi));
    }
    return v;
}

}  // namespace

nlohmann::json kernel_to_json(const DiscreteKernel& k) {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["p"] = k.p;
    j["q"] = k.q;
    j["r"] = k.r;
    j["values"] = tensor_to_json(k.values, k.mx(), k.my(), k.mz());
    return j;
}

nlohmann::json piecewise_to_json(const PiecewiseKernel& pk) {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["x_cuts"] = pk.x_cuts;
    j["y_cuts"] = pk.y_cuts;
    j["z_cuts"] = pk.z_cuts;
    j["values"] = tensor_to_json(pk.values, pk.mx(), pk.my(), pk.mz());
    return j;
}

bool json_is_piecewise(const nlohmann::json& j) { return j.contains("x_cuts"); }

DiscreteKernel kernel_from_json(const nlohmann::json& j) {
    DiscreteKernel k;
    k.p = doubles_from(j, "p");
    k.q = doubles_from(j, "q");
    k.r = doubles_from(j, "r");
    if (k.p.empty() || k.q.empty() || k.r.empty())
        throw ValidationError("kernel marginals must be nonempty");
    k.values = tensor_from(j, k.p.size(), k.q.size(), k.r.size());
    return k;
}

PiecewiseKernel piecewise_from_json(const nlohmann::json& j) {
    PiecewiseKernel pk;
    pk.x_cuts = doubles_from(j, "x_cuts");
    pk.y_cuts = doubles_from(j, "y_cuts");
    pk.z_cuts = doubles_from(j, "z_cuts");
    if (pk.x_cuts.size() < 2 || pk.y_cuts.size() < 2 || pk.z_cuts.size() < 2)
        throw ValidationError("cut sequences need at least two points");
    pk.values = tensor_from(j, pk.mx(), pk.my(), pk.mz());
    return pk;
}

std::string planeset_to_text(const PlaneSet& A) {
    std::ostringstream out;
    out << "group: " << A.group().descriptor().str() << "\n";
    const std::uint64_t n = A.order();
    std::string row(n, '0');
    for (std::uint64_t x = 0; x < n; ++x) {
        for (std::uint64_t y = 0; y < n; ++y) row[y] = A.get(x, y) ? '1' : '0';
        out << row << "\n";
    }
    return out.str();
}

PlaneSet planeset_from_text(const std::string& text) {
    std::istringstream in(text);
    std::string header;
    if (!std::getline(in, header)) throw ValidationError("empty plane-set file");
    const std::string prefix = "group:";
    if (header.rfind(prefix, 0) != 0)
        throw ValidationError("plane-set file must start with 'group: <descriptor>'");
    FiniteAbelianGroup g{GroupDescriptor::parse(header.substr(prefix.size()))};
    PlaneSet A{g};
    const std::uint64_t n = g.order();
    std::string line;
    for (std::uint64_t x = 0; x < n; ++x) {
        if (!std::getline(in, line))
            throw ValidationError("plane-set file ended at row " + std::to_string(x) + " of " +
                                  std::to_string(n));
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.size() != n)
            throw ValidationError("plane-set row " + std::to_string(x) + " has " +
                                  std::to_string(line.size()) + " characters, expected " +
                                  std::to_string(n));
        for (std::uint64_t y = 0; y < n; ++y) {
            if (line[y] == '1')
                A.set(x, y, true);
            else if (line[y] != '0')
                throw ValidationError("plane-set row " + std::to_string(x) +
                                      " has a character other than '0'/'1'");
        }
    }
    return A;
}

std::string census_counts_to_csv(std::span<const std::int64_t> counts) {
    std::ostringstream out;
    out << "d_index,count\n";
    for (std::size_t d = 0; d < counts.size(); ++d) out << d << "," << counts[d] << "\n";
    return out.str();
}

std::string census_to_csv(const CornerCensus& c) { return census_counts_to_csv(c.counts); }

namespace {

std::string fmt12(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace

nlohmann::json optimize_report_to_json(const OptimizeReport& rep) {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["config"] = {{"alpha", rep.config.alpha},
                   {"shape", rep.config.shape},
                   {"restarts", rep.config.restarts},
                   {"max_iters", rep.config.max_iters},
                   {"seed", rep.config.seed},
                   {"tolerance", rep.config.tolerance},
                   {"step", {{"initial", rep.config.step.initial},
                             {"grow", rep.config.step.grow},
                             {"shrink", rep.config.step.shrink},
                             {"max_backtracks", rep.config.step.max_backtracks}}}};
    j["best_kernel"] = kernel_to_json(rep.best_kernel);
    j["best_t"] = rep.best_t;
    j["best_restart"] = rep.best_restart;
    j["trajectory"] = rep.trajectory;
    j["envelope"] = {{"lower", rep.envelope_lower},
                     {"upper", rep.envelope_upper},
                     {"upper_clamped", std::min(1.0, rep.envelope_upper)}};
    j["upper_warning"] = rep.upper_warning;
    j["violations"] = rep.violations;
    return j;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "alpha,best_t,lower,upper\n";
    for (const auto& r : rows)
        out << fmt12(r.alpha) << "," << fmt12(r.best_t) << "," << fmt12(r.lower) << ","
            << fmt12(std::min(1.0, r.upper)) << "\n";
    return out.str();
}

nlohmann::json construction_report_to_json(const ConstructionReport& rep) {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["group"] = rep.group;
    j["seed"] = rep.seed;
    j["kernel_id"] = rep.kernel_id;
    j["rng"] = rep.rng;
    j["realized_alpha"] = rep.realized_alpha;
    j["t_target"] = rep.t_target;
    j["max_nonzero_census_density"] = rep.max_nonzero_census_density;
    j["max_d"] = rep.max_d;
    j["slack"] = rep.slack;
    j["success"] = rep.success;
    j["histogram"] = {{"bins", kHistogramBins}, {"lo", 0.0}, {"hi", 1.0}, {"counts", rep.histogram}};
    return j;
}

std::string census_density_csv(const CornerCensus& c) {
    std::ostringstream out;
    out << "d_index,density\n";
    const double n2 = static_cast<double>(c.counts.size()) * static_cast<double>(c.counts.size());
    for (std::size_t d = 0; d < c.counts.size(); ++d)
        out << d << "," << fmt12(static_cast<double>(c.counts[d]) / n2) << "\n";
    return out.str();
}

nlohmann::json boxing_to_json(const Boxing& bx) {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["ambient"] = bx.W.ambient();
    j["basis"] = bx.W.basis();
    j["codim"] = bx.W.codim();
    j["m"] = bx.m;
    nlohmann::json boxes = nlohmann::json::array();
    for (const auto& b : bx.boxes) {
        nlohmann::json jb;
        jb["x_rep"] = b.x_rep;
        jb["y_rep"] = b.y_rep;
        jb["z_rep"] = b.z_rep;
        jb["B"] = b.B;
        jb["C"] = b.C;
        jb["D"] = b.D;
        boxes.push_back(std::move(jb));
    }
    j["boxes"] = std::move(boxes);
    return j;
}

nlohmann::json regularity_outcome_to_json(const RegularityOutcome& out) {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["regular"] = out.regular;
    j["diagnostic"] = out.diagnostic;
    j["refine_a_calls"] = out.refine_a_calls;
    j["refine_b_calls"] = out.refine_b_calls;
    j["codim"] = out.boxing.W.codim();
    j["m"] = out.boxing.m;
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : out.trajectory)
        steps.push_back({{"op", s.op}, {"codim", s.codim}, {"m", s.m}, {"e1", s.e1}, {"e2", s.e2}});
    j["trajectory"] = std::move(steps);
    return j;
}

std::string trajectory_to_csv(const std::vector<TrajectoryStep>& steps) {
    std::ostringstream out;
    out << "step,op,codim,m,e1,e2\n";
    for (std::size_t i = 0; i < steps.size(); ++i)
        out << i << "," << steps[i].op << "," << steps[i].codim << "," << steps[i].m << ","
            << fmt12(steps[i].e1) << "," << fmt12(steps[i].e2) << "\n";
    return out.str();
}

nlohmann::json manifest_to_json(const RunManifest& m) {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["tool"] = "corners";
    j["version"] = kToolVersion;
    j["subcommand"] = m.subcommand;
    j["config"] = m.config;
    j["seed"] = m.seed;
    j["input_hashes"] = m.input_hashes;
    j["rng"] = kRngVersion;
    j["duration_ms"] = m.duration_ms;
    return j;
}

}  // namespace corners
