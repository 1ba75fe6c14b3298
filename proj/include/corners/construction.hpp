#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "corners/groups.hpp"
#include "corners/kernel.hpp"

namespace corners {

// Outcome of one randomized construction run: draw per-element labels, build
// A, census it, and compare the popular-difference density against T(f) plus
// a concentration-scale allowance slack(N) = 5 sqrt(ln N / N).
struct ConstructionReport {
    std::string group;
    std::uint64_t seed = 0;
    std::string kernel_id;  // caller-supplied identity, e.g. a file hash
    double realized_alpha = 0.0;
    double t_target = 0.0;
    double max_nonzero_census_density = 0.0;
    std::uint64_t max_d = 0;
    double slack = 0.0;
    bool success = false;  // max nonzero density <= t_target + slack
    std::vector<std::int64_t> histogram;  // |S_d|/N^2 over d != 0, 64 bins on [0,1]
    std::string rng;                      // pinned generator version
};

inline constexpr int kHistogramBins = 64;

double construction_slack(std::uint64_t n);  // 5 sqrt(ln N / N)

// Labels X_g ~ p, Y_g ~ q, Z_g ~ r drawn independently per element via
// inverse CDF; (x, y) joins A with probability values[X_x, Y_y, Z_{-x-y}].
// Fully determined by (kernel, group, seed), independent of thread count.
PlaneSet sample_set(const DiscreteKernel& k, const FiniteAbelianGroup& g, std::uint64_t seed);

// Monte-Carlo estimate of T(f): each trial picks a corner (x, y, d), d != 0,
// with x, x+d, y, y+d, z, z+d pairwise distinct, draws fresh labels for the
// six involved elements, and samples the three vertex memberships.
double corner_probability_check(const DiscreteKernel& k, const FiniteAbelianGroup& g,
                                std::uint64_t seed, std::uint64_t trials);

ConstructionReport run_experiment(const DiscreteKernel& k, const FiniteAbelianGroup& g,
                                  std::uint64_t seed, const std::string& kernel_id = "");

// the census behind a report, for CSV dumps
CornerCensus experiment_census(const DiscreteKernel& k, const FiniteAbelianGroup& g,
                               std::uint64_t seed);

}  // namespace corners
