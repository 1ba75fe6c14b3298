#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "corners/errors.hpp"
#include "corners/regularity.hpp"
#include "oracles.hpp"

using namespace corners;

namespace {

FiniteAbelianGroup f2(unsigned n) {
    return FiniteAbelianGroup{GroupDescriptor::vector_group(2, n)};
}

// rows split into two density classes by a parity character: the degree
// structure makes the quasirandomness witnesses findable, and the split
// subsets the refinement produces are close to affine half-spaces
PlaneSet row_stripe(unsigned n, std::uint32_t u, double lo, double hi, std::uint64_t seed) {
    PlaneSet A{f2(n)};
    SplitMix64 gen(substream(seed, 0x57524950ull));
    const std::uint64_t N = A.order();
    for (std::uint64_t x = 0; x < N; ++x) {
        const double p = (std::popcount(static_cast<std::uint32_t>(x) & u) & 1) ? hi : lo;
        for (std::uint64_t y = 0; y < N; ++y)
            if (gen.next_u01() < p) A.set(x, y, true);
    }
    return A;
}

PlaneSet full_plane(unsigned n) {
    PlaneSet A{f2(n)};
    for (std::uint64_t x = 0; x < A.order(); ++x)
        for (std::uint64_t y = 0; y < A.order(); ++y) A.set(x, y, true);
    return A;
}

}  // namespace

TEST_CASE("subspace basics") {
    const auto W = Subspace::full(4);
    CHECK(W.dim() == 4);
    CHECK(W.codim() == 0);
    CHECK(W.coset_reps() == std::vector<std::uint32_t>{0});

    // span{1100, 0110} inside F_2^4
    Subspace S(4, {0b1100, 0b0110});
    CHECK(S.dim() == 2);
    CHECK(S.codim() == 2);
    CHECK(S.contains(0b1010));  // 1100 ^ 0110
    CHECK_FALSE(S.contains(0b1000));
    for (std::uint64_t c = 0; c < S.size(); ++c) CHECK(S.coords(S.element(c)) == c);

    const auto reps = S.coset_reps();
    CHECK(reps.size() == 4);
    CHECK(std::is_sorted(reps.begin(), reps.end()));
    for (auto r : reps) CHECK(S.coset_rep(r) == r);
    // the rep is the numerically smallest member of its coset
    for (auto r : reps)
        for (std::uint64_t c = 0; c < S.size(); ++c)
            CHECK(r <= (r ^ S.element(c)));
}

TEST_CASE("subspace character kernels") {
    const auto W = Subspace::full(3);
    // kernel of one character: codim 1
    const auto K1 = W.intersect_character_kernels(std::vector<std::uint64_t>{0b001});
    CHECK(K1.dim() == 2);
    // two independent characters: codim 2
    const auto K2 = W.intersect_character_kernels(std::vector<std::uint64_t>{0b001, 0b010});
    CHECK(K2.dim() == 1);
    // dependent characters do not over-shrink
    const auto K3 = W.intersect_character_kernels(std::vector<std::uint64_t>{0b011, 0b011});
    CHECK(K3.dim() == 2);
    // membership: <xi, coords(w)> = 0 for every returned basis vector
    for (std::uint32_t b : K2.basis())
        CHECK((std::popcount(W.coords(b) & 0b001ull) & 1) == 0);
}

TEST_CASE("walsh transform") {
    const auto W = Subspace::full(5);
    std::vector<std::uint32_t> coset(32);
    std::iota(coset.begin(), coset.end(), 0);

    // full coset: 1 at the trivial character, 0 elsewhere
    auto coef = walsh(W, coset, 0);
    CHECK(coef[0] == 1.0);
    for (std::size_t t = 1; t < coef.size(); ++t) CHECK(coef[t] == 0.0);

    // singleton: every coefficient is 1/|W|
    std::vector<std::uint32_t> single{7};
    coef = walsh(W, single, 0);
    for (double c : coef) CHECK(std::abs(c) == doctest::Approx(1.0 / 32.0));

    // outside the coset
    Subspace S(4, {0b0001, 0b0010});
    std::vector<std::uint32_t> bad{0b0100};
    CHECK_THROWS_AS((void)walsh(S, bad, 0), DomainError);
}

TEST_CASE("walsh matches the naive character sum, Parseval, exact round-trip") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const unsigned dim = 1 + seed % 8;
        const auto W = Subspace::full(dim);
        SplitMix64 gen(seed * 31 + 1);
        std::vector<std::uint32_t> cell;
        for (std::uint32_t e = 0; e < (1u << dim); ++e)
            if (gen.next_u01() < 0.5) cell.push_back(e);
        const auto coef = walsh(W, cell, 0);
        const auto naive = oracles::naive_walsh(W, cell, 0);
        double parseval = 0.0;
        for (std::size_t t = 0; t < coef.size(); ++t) {
            CHECK(coef[t] == doctest::Approx(naive[t]).epsilon(1e-12));
            parseval += coef[t] * coef[t];
        }
        const double delta = static_cast<double>(cell.size()) / static_cast<double>(W.size());
        CHECK(std::abs(parseval - delta) <= 1e-12);
        CHECK(coef[0] == doctest::Approx(delta).epsilon(1e-15));

        // inverse recovers the indicator bit-exactly (dyadic arithmetic)
        const auto back = walsh_inverse(W, coef);
        std::vector<double> indicator(W.size(), 0.0);
        for (std::uint32_t e : cell) indicator[W.coords(e)] = 1.0;
        CHECK(back == indicator);
    }
}

TEST_CASE("uniformity audit: full cosets pass, half-spaces fail with magnitude 1/2") {
    const auto bx = Boxing::trivial(5);
    const auto audit = uniformity_audit(bx, 0.3);
    CHECK(audit.witnesses.empty());
    CHECK_FALSE(audit.condition_failed(0.3));

    // handmade boxing over W = F_2^5 whose B partition is a half-space split
    Boxing hb = Boxing::trivial(5);
    hb.m = 2;
    std::vector<std::uint32_t> h0, h1;
    for (std::uint32_t e = 0; e < 32; ++e) ((e & 1u) ? h1 : h0).push_back(e);
    hb.boxes[0].B = {h0, h1};
    const auto a2 = uniformity_audit(hb, 0.3);
    REQUIRE(a2.witnesses.size() == 1);
    CHECK(a2.witnesses[0].magnitude == doctest::Approx(0.5));
    CHECK(a2.witnesses[0].part == 0);
    CHECK(a2.condition_failed(0.3));
}

TEST_CASE("quasirandom audit: complete bipartite passes, quarter block fails") {
    const unsigned n = 5;
    const auto bx = Boxing::trivial(n);

    const auto fullA = full_plane(n);
    CHECK_FALSE(quasirandom_audit(fullA, bx, 0, PairType::BC, 0, 0, 0.05, 1).has_value());

    // A = {(x, y) : bit0 x = 0 and bit0 y = 0}: degree structure finds a witness
    PlaneSet quarter{f2(n)};
    for (std::uint64_t x = 0; x < 32; x += 2)
        for (std::uint64_t y = 0; y < 32; y += 2) quarter.set(x, y, true);
    const auto w = quasirandom_audit(quarter, bx, 0, PairType::BC, 0, 0, 0.25, 1);
    REQUIRE(w.has_value());
    CHECK(std::abs(w->subset_density - w->box_density) >= 0.25);

    // block-diagonal halves: found in sampled mode for eps <= 1/4
    PlaneSet blocks{f2(n)};
    for (std::uint64_t x = 0; x < 32; ++x)
        for (std::uint64_t y = 0; y < 32; ++y)
            if ((x & 1u) == (y & 1u)) blocks.set(x, y, true);
    const auto wb = quasirandom_audit(blocks, bx, 0, PairType::BC, 0, 0, 0.25, 1);
    REQUIRE(wb.has_value());
    CHECK(std::abs(wb->subset_density - wb->box_density) >= 0.25);
}

TEST_CASE("quasirandom audit: random density-1/2 boxes of side 32 pass at eps 0.45") {
    const unsigned n = 5;
    const auto bx = Boxing::trivial(n);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto A = oracles::random_planeset(f2(n), 0.5, seed + 400);
        CHECK_FALSE(quasirandom_audit(A, bx, 0, PairType::BC, 0, 0, 0.45, seed).has_value());
    }
}

TEST_CASE("quasirandom audit agrees with full double-subset enumeration on tiny cells") {
    // cells of sizes 6 and 6 inside F_2^3; complete mode must match brute force
    const unsigned n = 3;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        Boxing hb = Boxing::trivial(n);
        hb.m = 2;
        std::vector<std::uint32_t> b0{0, 1, 2, 3, 4, 5}, b1{6, 7};
        std::vector<std::uint32_t> c0{0, 2, 3, 5, 6, 7}, c1{1, 4};
        hb.boxes[0].B = {b0, b1};
        hb.boxes[0].C = {c0, c1};
        const double dens = 0.25 + 0.05 * static_cast<double>(seed % 10);
        const auto A = oracles::random_planeset(f2(n), dens, seed + 900);
        for (double eps : {0.2, 0.3, 0.45}) {
            const auto got = quasirandom_audit(A, hb, 0, PairType::BC, 0, 0, eps, seed);
            // brute force over every admissible subset pair
            const auto sL = static_cast<std::size_t>(std::ceil(eps * 6.0 - 1e-9));
            std::int64_t edges = 0;
            for (auto x : b0)
                for (auto y : c0) edges += A.get(x, y);
            const double delta = static_cast<double>(edges) / 36.0;
            bool brute = false;
            for (std::uint32_t lm = 1; lm < 64 && !brute; ++lm) {
                if (static_cast<std::size_t>(std::popcount(lm)) < sL) continue;
                for (std::uint32_t rm = 1; rm < 64 && !brute; ++rm) {
                    if (static_cast<std::size_t>(std::popcount(rm)) < sL) continue;
                    std::int64_t cnt = 0;
                    for (int a = 0; a < 6; ++a)
                        for (int b = 0; b < 6; ++b)
                            if (((lm >> a) & 1u) && ((rm >> b) & 1u) && A.get(b0[a], c0[b])) ++cnt;
                    const double d2 = static_cast<double>(cnt) /
                                      (static_cast<double>(std::popcount(lm)) *
                                       static_cast<double>(std::popcount(rm)));
                    if (std::abs(d2 - delta) >= eps) brute = true;
                }
            }
            CHECK(got.has_value() == brute);
        }
    }
}

TEST_CASE("energies on the trivial boxing and the split-in-half invariance") {
    const unsigned n = 4;
    const auto A = oracles::random_planeset(f2(n), 0.5, 11);
    const auto bx = Boxing::trivial(n);
    const auto e = energies(bx, A);
    CHECK(e.e1 == doctest::Approx(1.0));

    // e2 = mean of the three squared pair densities; all three equal |A|/N^2 here
    const double dens = static_cast<double>(A.size()) / (16.0 * 16.0);
    CHECK(e.e2 == doctest::Approx(dens * dens).epsilon(1e-12));

    CHECK(e.e2 == doctest::Approx(oracles::e2_direct(bx, A)).epsilon(1e-12));

    // splitting a cell into halves with equal A-density leaves e2 unchanged
    Boxing hb = Boxing::trivial(2);
    PlaneSet tiny{f2(2)};
    // arrange equal density on even/odd x: A = {(0,0),(1,0),(2,1),(3,1)}
    tiny.set(0, 0, true);
    tiny.set(1, 0, true);
    tiny.set(2, 1, true);
    tiny.set(3, 1, true);
    const auto before = energies(hb, tiny);
    hb.m = 2;
    hb.boxes[0].B = {{0, 2}, {1, 3}};  // both halves meet A in the same density
    const auto after = energies(hb, tiny);
    CHECK(after.e2 == doctest::Approx(before.e2).epsilon(1e-12));

    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        Boxing rb = Boxing::trivial(3);
        rb.m = 3;
        SplitMix64 gen(seed);
        Partition part(3);
        for (std::uint32_t e2v = 0; e2v < 8; ++e2v)
            part[gen.next_below(3)].push_back(e2v);
        rb.boxes[0].C = part;
        const auto Ar = oracles::random_planeset(f2(3), 0.4, seed + 50);
        const auto got = energies(rb, Ar);
        CHECK(got.e2 == doctest::Approx(oracles::e2_direct(rb, Ar)).epsilon(1e-11));
        CHECK(got.e1 >= 0.0);
        CHECK(got.e1 <= 1.0 + 1e-12);
        CHECK(got.e2 <= 1.0 + 1e-12);
    }
}

TEST_CASE("refine_A: codim growth, m constant, energy laws") {
    const unsigned n = 5;
    // half-space cells make the uniformity witness deterministic
    Boxing hb = Boxing::trivial(n);
    hb.m = 2;
    std::vector<std::uint32_t> h0, h1;
    for (std::uint32_t e = 0; e < 32; ++e) ((e & 1u) ? h1 : h0).push_back(e);
    hb.boxes[0].B = {h0, h1};
    const auto A = oracles::random_planeset(f2(n), 0.5, 21);

    const auto audit = uniformity_audit(hb, 0.3);
    REQUIRE(audit.witnesses.size() == 1);
    const auto before = energies(hb, A);
    const auto refined = refine_A(hb, audit, 8);
    CHECK(refined.W.codim() == 1);  // single witness: codim grows by exactly one
    CHECK(refined.m == hb.m);
    CHECK(refined.boxes.size() == 4);
    const auto after = energies(refined, A);
    const double m6 = std::pow(2.0, 6);
    CHECK(after.e1 >= before.e1 + std::pow(0.3, 3) / (12.0 * m6) - 1e-10);
    CHECK(after.e2 >= before.e2 - 1e-10);

    // cells still partition their cosets
    for (const auto& box : refined.boxes) {
        std::size_t total = 0;
        for (const auto& cell : box.B) {
            total += cell.size();
            for (auto e : cell) CHECK(refined.W.contains(e ^ box.x_rep));
        }
        CHECK(total == refined.W.size());
    }

    CHECK_THROWS_AS((void)refine_A(hb, UniformityAudit{}, 8), DomainError);
    CHECK_THROWS_AS((void)refine_A(hb, audit, 0), ResourceError);  // codim cap
}

TEST_CASE("refine_B: witnessed split increases E2 by the lemma bound") {
    const unsigned n = 5;
    PlaneSet quarter{f2(n)};
    for (std::uint64_t x = 0; x < 32; x += 2)
        for (std::uint64_t y = 0; y < 32; y += 2) quarter.set(x, y, true);
    const auto bx = Boxing::trivial(n);
    const auto qa = quasirandom_audit_all(quarter, bx, 0.25, 3);
    CHECK(qa.condition_failed(0.25));
    REQUIRE(!qa.witnesses.empty());

    const auto before = energies(bx, quarter);
    const auto refined = refine_B(bx, qa.witnesses, 64);
    const auto after = energies(refined, quarter);
    CHECK(after.e2 > before.e2);
    // per-witness bound: sum of delta(L) delta(R) eps^4 / 3 over the witnesses
    double bound = 0.0;
    for (const auto& w : qa.witnesses) {
        (void)w;
        bound += 1.0 * 1.0 * std::pow(0.25, 4) / 3.0;  // full cells: deltas are 1
    }
    CHECK(after.e2 >= before.e2 + bound - 1e-10);
    CHECK(after.e2 >= before.e2 + std::pow(0.25, 6) / 3.0 - 1e-10);

    CHECK_THROWS_AS((void)refine_B(bx, {}, 64), DomainError);
    CHECK_THROWS_AS((void)refine_B(bx, qa.witnesses, 1), ResourceError);  // m cap
}

TEST_CASE("refine_B: E2 never decreases under arbitrary synthetic splits") {
    const unsigned n = 4;
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        const auto A = oracles::random_planeset(f2(n), 0.45, seed + 70);
        Boxing bx = Boxing::trivial(n);
        SplitMix64 gen(seed);
        // fabricate unverified witnesses with random subsets; only the
        // variance lemma protects E2 here
        std::vector<QuasiWitness> ws;
        for (int t = 0; t < 3; ++t) {
            QuasiWitness w;
            w.box = 0;
            w.type = static_cast<PairType>(t);
            w.i = w.j = 0;
            for (std::uint32_t e = 0; e < 16; ++e) {
                if (gen.next_u01() < 0.4) w.left_subset.push_back(e);
                if (gen.next_u01() < 0.4) w.right_subset.push_back(e);
            }
            if (w.left_subset.empty()) w.left_subset.push_back(1);
            if (w.right_subset.empty()) w.right_subset.push_back(2);
            ws.push_back(std::move(w));
        }
        const auto before = energies(bx, A);
        const auto refined = refine_B(bx, ws, 64);
        const auto after = energies(refined, A);
        CHECK(after.e2 >= before.e2 - 1e-10);
    }
}

TEST_CASE("find_regular_boxing: full plane passes immediately") {
    const auto A = full_plane(6);
    const auto out = find_regular_boxing(A, 0.3, RegularityCaps{}, 0);
    CHECK(out.regular);
    CHECK(out.trajectory.size() == 1);
    CHECK(out.boxing.W.codim() == 0);
    CHECK(out.boxing.m == 1);
}

TEST_CASE("find_regular_boxing: random density-1/2 sets terminate within caps") {
    RegularityCaps caps;
    caps.codim_cap = 6;
    caps.m_cap = 32;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto A = oracles::random_planeset(f2(8), 0.5, seed);
        const auto out = find_regular_boxing(A, 0.3, caps, seed);
        CHECK(out.regular);
        CHECK(out.refine_b_calls <= static_cast<std::size_t>(std::ceil(3.0 / std::pow(0.3, 6))));
        // E2 is nondecreasing along the whole trajectory
        for (std::size_t i = 1; i < out.trajectory.size(); ++i)
            CHECK(out.trajectory[i].e2 >= out.trajectory[i - 1].e2 - 1e-10);
    }
}

TEST_CASE("find_regular_boxing: structured sets refine and still terminate") {
    RegularityCaps caps;
    caps.codim_cap = 6;
    caps.m_cap = 24;
    std::size_t refined_runs = 0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto A = row_stripe(6, 0b101, 0.2, 0.8, seed);
        const auto out = find_regular_boxing(A, 0.25, caps, seed);
        if (out.trajectory.size() > 1) ++refined_runs;
        for (std::size_t i = 1; i < out.trajectory.size(); ++i)
            CHECK(out.trajectory[i].e2 >= out.trajectory[i - 1].e2 - 1e-10);
        if (!out.regular) CHECK(!out.diagnostic.empty());
    }
    CHECK(refined_runs > 0);
}

TEST_CASE("box_kernel identities") {
    // trivial boxing over the full plane: values clip to exactly 1
    const auto A = full_plane(4);
    const auto bx = Boxing::trivial(4);
    const auto bk = box_kernel(bx, 0, A);
    CHECK(bk.kernel.values == std::vector<double>{1.0});
    CHECK(bk.alpha_v == 1.0);
    CHECK(bk.unclipped[0] == doctest::Approx(1.0));

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto Ar = oracles::random_planeset(f2(5), 0.35 + 0.05 * (seed % 5), seed + 30);
        // a boxing with real structure: one refinement round if witnesses exist
        Boxing rb = Boxing::trivial(5);
        const auto qa = quasirandom_audit_all(Ar, rb, 0.18, seed);
        if (!qa.witnesses.empty()) rb = refine_B(rb, qa.witnesses, 64);
        for (std::size_t b = 0; b < rb.box_count(); ++b) {
            const auto bkr = box_kernel(rb, b, Ar);
            CHECK(std::abs(bkr.unclipped_expectation - bkr.alpha_v) <= 1e-12);
            CHECK(expectation(bkr.kernel) <= bkr.unclipped_expectation + 1e-12);
            CHECK(bkr.clip_loss >= -1e-15);
            for (double v : bkr.kernel.values) CHECK((v >= 0.0 && v <= 1.0));
        }
    }
}

TEST_CASE("box_kernel clip loss is bounded by eps on uniformity-passing boxes") {
    const double eps = 0.3;
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const auto A = oracles::random_planeset(f2(7), 0.5, seed + 200);
        const auto out = find_regular_boxing(A, eps, RegularityCaps{}, seed);
        REQUIRE(out.regular);
        const auto ua = uniformity_audit(out.boxing, eps);
        std::vector<char> fails(out.boxing.box_count(), 0);
        for (const auto& w : ua.witnesses) fails[w.box] = 1;
        for (std::size_t b = 0; b < out.boxing.box_count(); ++b) {
            if (fails[b]) continue;
            const auto bk = box_kernel(out.boxing, b, A);
            CHECK(bk.clip_loss <= eps + 1e-12);
            CHECK(std::abs(bk.unclipped_expectation - bk.alpha_v) <= 1e-12);
        }
    }
}

TEST_CASE("corners_within_W restriction identities") {
    const auto A = oracles::random_planeset(f2(6), 0.5, 5);

    Subspace zero(6, {});
    const auto c0 = corners_within_W(A, zero);
    CHECK(c0.total == static_cast<std::int64_t>(A.size()));
    CHECK(c0.degenerate == c0.total);

    const auto full = Subspace::full(6);
    const auto cf = corners_within_W(A, full);
    const auto cen = census(A);
    std::int64_t sum = 0;
    for (auto v : cen.counts) sum += v;
    CHECK(cf.total == sum);
    CHECK(cf.degenerate == static_cast<std::int64_t>(A.size()));

    // intermediate subspace: equals the sum of census counts over d in W
    Subspace half(6, {0b000001, 0b000010, 0b000100});
    const auto ch = corners_within_W(A, half);
    std::int64_t expect = 0;
    for (std::uint64_t u = 0; u < half.size(); ++u) expect += cen.counts[half.element(u)];
    CHECK(ch.total == expect);
}

TEST_CASE("corner count lower bound from box kernels on audit-passing boxings") {
    // empirical form of the per-box counting claim, with a 10 eps allowance
    const double eps = 0.3;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto A = oracles::random_planeset(f2(8), 0.5, seed + 20);
        const auto out = find_regular_boxing(A, eps, RegularityCaps{}, seed);
        REQUIRE(out.regular);
        const double wsz = static_cast<double>(out.boxing.W.size());
        double t_sum = 0.0;
        for (std::size_t b = 0; b < out.boxing.box_count(); ++b)
            t_sum += t_value(box_kernel(out.boxing, b, A).kernel);
        const double err = 10.0 * eps * static_cast<double>(out.boxing.box_count());
        const auto cw = corners_within_W(A, out.boxing.W);
        CHECK(static_cast<double>(cw.total) >= (t_sum - err) * wsz * wsz * wsz);
    }
}
