// Test-only oracles, kept independent of the library's evaluation paths:
// the six-index expansion of T, central finite differences, a direct
// character-sum Walsh transform, and a per-pair direct E2 summation.
#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "corners/groups.hpp"
#include "corners/kernel.hpp"
#include "corners/regularity.hpp"
#include "corners/rng.hpp"

namespace oracles {

// T(f) = E[ f(X,Y,Z') f(X,Y',Z) f(X',Y,Z) ] expanded over all six indices.
inline double t_value_six_loop(const corners::DiscreteKernel& k) {
    const std::size_t mx = k.mx(), my = k.my(), mz = k.mz();
    double total = 0.0;
    for (std::size_t i = 0; i < mx; ++i)
        for (std::size_t j = 0; j < my; ++j)
            for (std::size_t c = 0; c < mz; ++c) {
                double inner = 0.0;
                for (std::size_t i2 = 0; i2 < mx; ++i2)
                    for (std::size_t j2 = 0; j2 < my; ++j2)
                        for (std::size_t c2 = 0; c2 < mz; ++c2)
                            inner += k.p[i2] * k.q[j2] * k.r[c2] *
                                     k.at(i, j, c2) * k.at(i, j2, c) * k.at(i2, j, c);
                total += k.p[i] * k.q[j] * k.r[c] * inner;
            }
    return total;
}

inline std::vector<double> central_diff_gradient(const corners::DiscreteKernel& k, double h) {
    std::vector<double> g(k.values.size());
    std::vector<double> v = k.values;
    for (std::size_t t = 0; t < v.size(); ++t) {
        const double keep = v[t];
        v[t] = keep + h;
        const double up = corners::detail::t_value_raw(k.p, k.q, k.r, v);
        v[t] = keep - h;
        const double dn = corners::detail::t_value_raw(k.p, k.q, k.r, v);
        v[t] = keep;
        g[t] = (up - dn) / (2.0 * h);
    }
    return g;
}

inline corners::DiscreteKernel random_kernel(std::size_t mx, std::size_t my, std::size_t mz,
                                             std::uint64_t seed) {
    corners::SplitMix64 gen(corners::substream(seed, corners::stream_tag::test_data));
    corners::DiscreteKernel k;
    auto marginal = [&](std::size_t m) {
        std::vector<double> v(m);
        double sum = 0.0;
        for (double& x : v) {
            x = 0.05 + gen.next_u01();
            sum += x;
        }
        for (double& x : v) x /= sum;
        return v;
    };
    k.p = marginal(mx);
    k.q = marginal(my);
    k.r = marginal(mz);
    k.values.resize(mx * my * mz);
    for (double& v : k.values) v = gen.next_u01();
    return k;
}

inline corners::PlaneSet random_planeset(const corners::FiniteAbelianGroup& g, double density,
                                         std::uint64_t seed) {
    corners::SplitMix64 gen(corners::substream(seed, corners::stream_tag::test_data ^ 0x5eedull));
    corners::PlaneSet A{g};
    for (std::uint64_t x = 0; x < g.order(); ++x)
        for (std::uint64_t y = 0; y < g.order(); ++y)
            if (gen.next_u01() < density) A.set(x, y, true);
    return A;
}

// direct character sum, no butterfly
inline std::vector<double> naive_walsh(const corners::Subspace& W,
                                       const std::vector<std::uint32_t>& cell,
                                       std::uint32_t basepoint) {
    const std::size_t size = W.size();
    std::vector<double> indicator(size, 0.0);
    for (std::uint32_t e : cell) indicator[W.coords(e ^ basepoint)] = 1.0;
    std::vector<double> coef(size, 0.0);
    for (std::size_t t = 0; t < size; ++t) {
        double s = 0.0;
        for (std::size_t u = 0; u < size; ++u)
            s += indicator[u] * ((std::popcount(t & u) & 1u) ? -1.0 : 1.0);
        coef[t] = s / static_cast<double>(size);
    }
    return coef;
}

// E2 by independent per-pair double loops over cell elements
inline double e2_direct(const corners::Boxing& bx, const corners::PlaneSet& A) {
    const double wsz = static_cast<double>(bx.W.size());
    double total = 0.0;
    for (const auto& box : bx.boxes) {
        auto pair_term = [&](const std::vector<std::uint32_t>& L,
                             const std::vector<std::uint32_t>& R, int type) {
            if (L.empty() || R.empty()) return 0.0;
            std::int64_t cnt = 0;
            for (std::uint32_t u : L)
                for (std::uint32_t v : R) {
                    bool edge = false;
                    if (type == 0) edge = A.get(u, v);
                    else if (type == 1) edge = A.get(u, u ^ v);
                    else edge = A.get(u ^ v, u);
                    if (edge) ++cnt;
                }
            const double dl = static_cast<double>(L.size()) / wsz;
            const double dr = static_cast<double>(R.size()) / wsz;
            const double dens = static_cast<double>(cnt) /
                                (static_cast<double>(L.size()) * static_cast<double>(R.size()));
            return dl * dr * dens * dens;
        };
        double e2 = 0.0;
        for (const auto& bi : box.B)
            for (const auto& cj : box.C) e2 += pair_term(bi, cj, 0);
        for (const auto& bi : box.B)
            for (const auto& dk : box.D) e2 += pair_term(bi, dk, 1);
        for (const auto& cj : box.C)
            for (const auto& dk : box.D) e2 += pair_term(cj, dk, 2);
        total += e2 / 3.0;
    }
    return total / static_cast<double>(bx.boxes.size());
}

inline corners::DiscreteKernel g_star() {
    corners::DiscreteKernel k;
    k.p = {0.5, 0.5};
    k.q = {0.5, 0.5};
    k.r = {0.5, 0.5};
    k.values = {0, 1, 1, 1, 1, 1, 1, 0};
    return k;
}

}  // namespace oracles
