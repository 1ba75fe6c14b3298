#include "corners/construction.hpp"

#include <algorithm>
#include <cmath>

#include "corners/errors.hpp"
#include "corners/rng.hpp"

namespace corners {

double construction_slack(std::uint64_t n) {
    return 5.0 * std::sqrt(std::log(static_cast<double>(n)) / static_cast<double>(n));
}

namespace {

std::vector<double> cdf_of(const std::vector<double>& m) {
    std::vector<double> cdf(m.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        acc += m[i];
        cdf[i] = acc;
    }
    cdf.back() = 1.0;
    return cdf;
}

std::size_t label_from_u01(const std::vector<double>& cdf, double u) {
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf.begin(),
                                                             static_cast<std::ptrdiff_t>(cdf.size()) - 1));
}

std::vector<std::uint32_t> draw_labels(const std::vector<double>& marginal, std::uint64_t n,
                                       std::uint64_t seed, std::uint64_t tag) {
    const auto cdf = cdf_of(marginal);
    const std::uint64_t stream = substream(seed, tag);
    std::vector<std::uint32_t> labels(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t g = 0; g < static_cast<std::ptrdiff_t>(n); ++g)
        labels[static_cast<std::size_t>(g)] =
            static_cast<std::uint32_t>(label_from_u01(cdf, draw_u01(stream, static_cast<std::uint64_t>(g))));
    return labels;
}

}  // namespace

PlaneSet sample_set(const DiscreteKernel& k, const FiniteAbelianGroup& g, std::uint64_t seed) {
    validate(k);
    const std::uint64_t n = g.order();
    const auto lx = draw_labels(k.p, n, seed, stream_tag::label_x);
    const auto ly = draw_labels(k.q, n, seed, stream_tag::label_y);
    const auto lz = draw_labels(k.r, n, seed, stream_tag::label_z);

    PlaneSet A{g};
    const std::uint64_t mem = substream(seed, stream_tag::membership);
    const std::size_t my = k.my(), mz = k.mz();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t xi = 0; xi < static_cast<std::ptrdiff_t>(n); ++xi) {
        const std::uint64_t x = static_cast<std::uint64_t>(xi);
        for (std::uint64_t y = 0; y < n; ++y) {
            const std::uint64_t z = g.neg(g.add(x, y));
            const double v = k.values[(lx[x] * my + ly[y]) * mz + lz[z]];
            if (draw_u01(mem, x * n + y) < v) A.set(x, y, true);
        }
    }
    return A;
}

double corner_probability_check(const DiscreteKernel& k, const FiniteAbelianGroup& g,
                                std::uint64_t seed, std::uint64_t trials) {
    validate(k);
    if (trials < 1) throw DomainError("corner_probability_check needs trials >= 1");
    const std::uint64_t n = g.order();
    if (n < 7)
        throw DomainError("group too small to pick six distinct corner elements (need order >= 7)");

    const auto cx = cdf_of(k.p), cy = cdf_of(k.q), cz = cdf_of(k.r);
    const std::size_t my = k.my(), mz = k.mz();

    std::uint64_t hits = 0;
#pragma omp parallel for schedule(static) reduction(+ : hits)
    for (std::ptrdiff_t ti = 0; ti < static_cast<std::ptrdiff_t>(trials); ++ti) {
        SplitMix64 gen(substream(seed, stream_tag::corner_trial + static_cast<std::uint64_t>(ti)));
        std::uint64_t x, y, d, z;
        while (true) {
            x = gen.next_below(n);
            y = gen.next_below(n);
            d = 1 + gen.next_below(n - 1);
            z = g.neg(g.add(g.add(x, y), d));
            const std::uint64_t e[6] = {x, g.add(x, d), y, g.add(y, d), z, g.add(z, d)};
            bool distinct = true;
            for (int a = 0; a < 6 && distinct; ++a)
                for (int b = a + 1; b < 6; ++b)
                    if (e[a] == e[b]) {
                        distinct = false;
                        break;
                    }
            if (distinct) break;
        }
        // fresh labels for the six elements involved
        const std::size_t ux = label_from_u01(cx, gen.next_u01());
        const std::size_t uxd = label_from_u01(cx, gen.next_u01());
        const std::size_t vy = label_from_u01(cy, gen.next_u01());
        const std::size_t vyd = label_from_u01(cy, gen.next_u01());
        const std::size_t wz = label_from_u01(cz, gen.next_u01());
        const std::size_t wzd = label_from_u01(cz, gen.next_u01());
        // vertices (x+d,y,z), (x,y+d,z), (x,y,z+d), membership sampled per vertex
        const double f1 = k.values[(uxd * my + vy) * mz + wz];
        const double f2 = k.values[(ux * my + vyd) * mz + wz];
        const double f3 = k.values[(ux * my + vy) * mz + wzd];
        const bool in1 = gen.next_u01() < f1;
        const bool in2 = gen.next_u01() < f2;
        const bool in3 = gen.next_u01() < f3;
        if (in1 && in2 && in3) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(trials);
}

CornerCensus experiment_census(const DiscreteKernel& k, const FiniteAbelianGroup& g,
                               std::uint64_t seed) {
    const PlaneSet A = sample_set(k, g, seed);
    return census(A);
}

ConstructionReport run_experiment(const DiscreteKernel& k, const FiniteAbelianGroup& g,
                                  std::uint64_t seed, const std::string& kernel_id) {
    validate(k);
    const std::uint64_t n = g.order();
    if (n < 16) throw DomainError("run_experiment needs a group of order >= 16");

    const PlaneSet A = sample_set(k, g, seed);
    const CornerCensus c = census(A);

    ConstructionReport rep;
    rep.group = g.descriptor().str();
    rep.seed = seed;
    rep.kernel_id = kernel_id;
    rep.realized_alpha = c.alpha;
    rep.t_target = t_value(k);
    rep.rng = kRngVersion;
    rep.slack = construction_slack(n);
    rep.histogram.assign(kHistogramBins, 0);

    const double n2 = static_cast<double>(n) * static_cast<double>(n);
    double maxdens = 0.0;
    std::uint64_t maxd = 1;
    for (std::uint64_t d = 1; d < n; ++d) {
        const double dens = static_cast<double>(c.counts[d]) / n2;
        if (dens > maxdens) {
            maxdens = dens;
            maxd = d;
        }
        const int bin = std::min(kHistogramBins - 1,
                                 static_cast<int>(dens * kHistogramBins));
        ++rep.histogram[static_cast<std::size_t>(bin)];
    }
    rep.max_nonzero_census_density = maxdens;
    rep.max_d = maxd;
    rep.success = maxdens <= rep.t_target + rep.slack;
    return rep;
}

}  // namespace corners
