// Benchmark comparing the OpenMP kernels against their serial references:
// census vs census_oracle, and single-thread vs full-thread runs of the
// census translation paths, t_value on large tensors, and sample_set.
// Checksums are printed so differing thread counts can be checked for
// bit-identical results.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>

#include "corners/construction.hpp"
#include "corners/groups.hpp"
#include "corners/kernel.hpp"
#include "corners/regularity.hpp"
#include "corners/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace corners;

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

void set_threads(int t) {
#ifdef _OPENMP
    omp_set_num_threads(t);
#else
    (void)t;
#endif
}

int hardware_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void row(const std::string& name, double ms, std::uint64_t checksum) {
    std::printf("%-46s %10.2f ms   checksum %016llx\n", name.c_str(), ms,
                static_cast<unsigned long long>(checksum));
}

std::uint64_t counts_checksum(const std::vector<std::int64_t>& counts) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (auto c : counts) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

DiscreteKernel g_star_kernel() {
    DiscreteKernel k;
    k.p = k.q = k.r = {0.5, 0.5};
    k.values = {0, 1, 1, 1, 1, 1, 1, 0};
    return k;
}

PlaneSet make_set(const char* desc, std::uint64_t seed) {
    FiniteAbelianGroup g{GroupDescriptor::parse(desc)};
    return sample_set(g_star_kernel(), g, seed);
}

}  // namespace

int main() {
    const int hw = hardware_threads();
    std::printf("corners bench (hardware threads: %d)\n\n", hw);

    {
        // parallel word-level census vs the serial naive oracle, same input
        const auto A = make_set("cyclic 64", 3);
        set_threads(hw);
        double t0 = now_ms();
        const auto fast = census(A);
        const double t_fast = now_ms() - t0;
        t0 = now_ms();
        const auto slow = census_oracle(A);
        const double t_slow = now_ms() - t0;
        row("census, cyclic 64, parallel", t_fast, counts_checksum(fast.counts));
        row("census_oracle, cyclic 64, serial", t_slow, counts_checksum(slow.counts));
        std::printf("  oracle/census ratio: %.1fx, results %s\n\n", t_slow / t_fast,
                    fast.counts == slow.counts ? "identical" : "DIFFER");
    }

    for (const char* desc : {"cyclic 2048", "vector 2 11"}) {
        const auto A = make_set(desc, 5);
        set_threads(1);
        double t0 = now_ms();
        const auto one = census(A);
        const double t_one = now_ms() - t0;
        set_threads(hw);
        t0 = now_ms();
        const auto all = census(A);
        const double t_all = now_ms() - t0;
        row(std::string("census, ") + desc + ", 1 thread", t_one, counts_checksum(one.counts));
        row(std::string("census, ") + desc + ", " + std::to_string(hw) + " threads", t_all,
            counts_checksum(all.counts));
        std::printf("  speedup: %.2fx, results %s\n\n", t_one / t_all,
                    one.counts == all.counts ? "identical" : "DIFFER");
    }

    {
        const auto big = tensor_power(g_star_kernel(), 7);  // 128^3 value cells
        set_threads(1);
        double t0 = now_ms();
        const double v1 = t_value(big);
        const double t_one = now_ms() - t0;
        set_threads(hw);
        t0 = now_ms();
        const double v2 = t_value(big);
        const double t_all = now_ms() - t0;
        std::uint64_t c1, c2;
        std::memcpy(&c1, &v1, 8);
        std::memcpy(&c2, &v2, 8);
        row("t_value, 128^3-cell tensor, 1 thread", t_one, c1);
        row(std::string("t_value, 128^3-cell tensor, ") + std::to_string(hw) + " threads", t_all,
            c2);
        std::printf("  speedup: %.2fx, results %s\n\n", t_one / t_all,
                    v1 == v2 ? "identical" : "DIFFER");
    }

    {
        FiniteAbelianGroup g{GroupDescriptor::parse("cyclic 2048")};
        const auto k = g_star_kernel();
        set_threads(1);
        double t0 = now_ms();
        const auto a1 = sample_set(k, g, 11);
        const double t_one = now_ms() - t0;
        set_threads(hw);
        t0 = now_ms();
        const auto a2 = sample_set(k, g, 11);
        const double t_all = now_ms() - t0;
        row("sample_set, cyclic 2048, 1 thread", t_one, a1.size());
        row(std::string("sample_set, cyclic 2048, ") + std::to_string(hw) + " threads", t_all,
            a2.size());
        bool same = a1.size() == a2.size();
        for (std::uint64_t x = 0; same && x < a1.order(); ++x)
            for (std::uint64_t y = 0; y < a1.order(); ++y)
                if (a1.get(x, y) != a2.get(x, y)) {
                    same = false;
                    break;
                }
        std::printf("  speedup: %.2fx, sets %s\n\n", t_one / t_all, same ? "identical" : "DIFFER");
    }

    {
        const auto W = Subspace::full(12);
        std::vector<std::uint32_t> cell;
        SplitMix64 gen(9);
        for (std::uint32_t e = 0; e < (1u << 12); ++e)
            if (gen.next_u01() < 0.5) cell.push_back(e);
        double t0 = now_ms();
        double acc = 0.0;
        for (int rep = 0; rep < 100; ++rep) acc += walsh(W, cell, 0)[1];
        const double t = now_ms() - t0;
        std::uint64_t c;
        std::memcpy(&c, &acc, 8);
        row("walsh, dim 12, 100 transforms", t, c);
    }
    return 0;
}
