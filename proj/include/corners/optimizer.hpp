#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "corners/kernel.hpp"

namespace corners {

struct StepRule {
    double initial = 0.5;     // first trial step
    double grow = 2.0;        // retry factor after an accepted step
    double shrink = 0.5;      // backtracking factor
    int max_backtracks = 60;  // halvings before declaring convergence
};

struct OptimizeConfig {
    double alpha = 0.5;                        // target expectation, in (0,1)
    std::array<std::size_t, 3> shape{2, 2, 2};
    int restarts = 20;
    int max_iters = 2000;
    StepRule step;
    std::uint64_t seed = 0;
    double tolerance = 1e-15;  // minimum T decrease still counted as progress
};

struct OptimizeReport {
    OptimizeConfig config;
    DiscreteKernel best_kernel;
    double best_t = 1.0;
    int best_restart = 0;
    std::vector<double> trajectory;       // final T per restart
    double envelope_lower = 0.0;          // alpha^4
    double envelope_upper = 1.0;          // (27/26) alpha^(3+c)
    bool upper_warning = false;           // best_t above the proved upper envelope
    std::vector<std::string> violations;  // feasibility breaches; must stay empty
};

// c = log(26/27) / log(3/4) = 0.1311...
double envelope_exponent_c();

// (alpha^4, (27/26) * alpha^(3+c)); the raw upper may exceed 1 near alpha = 1
std::pair<double, double> envelope(double alpha);

// d T / d values[a,b,c], closed form; matches central finite differences.
std::vector<double> t_gradient(const DiscreteKernel& k);

// Euclidean projection (under the p (x) q (x) r weighting) of a raw tensor onto
// { v in [0,1]^shape : sum p_i q_j r_k v_ijk = alpha }, by bisection on the
// uniform shift inside the clip.
DiscreteKernel project_feasible(std::vector<double> tensor, std::vector<double> p,
                                std::vector<double> q, std::vector<double> r, double alpha);

// Multi-start projected gradient descent with backtracking line search.
// Restart 0 always starts at the constant-alpha kernel; the others start from
// projected uniform noise. Deterministic for a fixed config, any thread count.
OptimizeReport minimize_t(const OptimizeConfig& cfg);

struct SweepRow {
    double alpha, best_t, lower, upper;
};

std::vector<SweepRow> sweep(const OptimizeConfig& base, const std::vector<double>& alphas);

// "a:b:step" or a comma-separated list
std::vector<double> parse_alphas(const std::string& text);

}  // namespace corners
