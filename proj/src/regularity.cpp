#include "corners/regularity.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "corners/errors.hpp"
#include "corners/rng.hpp"

namespace corners {

// ---------------------------------------------------------------- Subspace

Subspace Subspace::full(unsigned n) {
    std::vector<std::uint32_t> basis(n);
    for (unsigned i = 0; i < n; ++i) basis[i] = std::uint32_t{1} << (n - 1 - i);
    return Subspace(n, std::move(basis));
}

Subspace::Subspace(unsigned n, std::vector<std::uint32_t> vectors) : n_(n) {
    if (n == 0 || n > 31) throw DomainError("subspace ambient dimension must be in [1, 31]");
    for (std::uint32_t v : vectors) {
        if (v >> n) throw DomainError("basis vector outside the ambient space");
        // reduce by current basis
        for (std::size_t j = 0; j < basis_.size(); ++j)
            if ((v >> pivots_[j]) & 1u) v ^= basis_[j];
        if (v == 0) continue;
        const unsigned piv = 31 - static_cast<unsigned>(std::countl_zero(v));
        // clear the new pivot from the existing vectors
        for (std::size_t j = 0; j < basis_.size(); ++j)
            if ((basis_[j] >> piv) & 1u) basis_[j] ^= v;
        basis_.push_back(v);
        pivots_.push_back(piv);
        // keep pivots descending
        for (std::size_t j = basis_.size() - 1; j > 0 && pivots_[j] > pivots_[j - 1]; --j) {
            std::swap(pivots_[j], pivots_[j - 1]);
            std::swap(basis_[j], basis_[j - 1]);
        }
    }
}

std::uint32_t Subspace::element(std::uint64_t coords) const {
    std::uint32_t out = 0;
    for (std::size_t j = 0; j < basis_.size(); ++j)
        if ((coords >> j) & 1u) out ^= basis_[j];
    return out;
}

std::uint64_t Subspace::coords(std::uint32_t w) const {
    std::uint64_t c = 0;
    for (std::size_t j = 0; j < basis_.size(); ++j)
        if ((w >> pivots_[j]) & 1u) {
            c |= std::uint64_t{1} << j;
            w ^= basis_[j];
        }
    if (w != 0) throw DomainError("element is not in the subspace");
    return c;
}

bool Subspace::contains(std::uint32_t v) const {
    for (std::size_t j = 0; j < basis_.size(); ++j)
        if ((v >> pivots_[j]) & 1u) v ^= basis_[j];
    return v == 0;
}

std::uint32_t Subspace::coset_rep(std::uint32_t x) const {
    for (std::size_t j = 0; j < basis_.size(); ++j)
        if ((x >> pivots_[j]) & 1u) x ^= basis_[j];
    return x;
}

std::vector<std::uint32_t> Subspace::coset_reps() const {
    std::vector<unsigned> free_bits;
    for (unsigned b = 0; b < n_; ++b)
        if (std::find(pivots_.begin(), pivots_.end(), b) == pivots_.end()) free_bits.push_back(b);
    std::vector<std::uint32_t> reps;
    reps.reserve(std::size_t{1} << free_bits.size());
    for (std::uint64_t s = 0; s < (std::uint64_t{1} << free_bits.size()); ++s) {
        std::uint32_t rep = 0;
        for (std::size_t t = 0; t < free_bits.size(); ++t)
            if ((s >> t) & 1u) rep |= std::uint32_t{1} << free_bits[t];
        reps.push_back(rep);
    }
    return reps;
}

Subspace Subspace::intersect_character_kernels(std::span<const std::uint64_t> characters) const {
    const unsigned d = dim();
    // row-reduce the characters over the coordinate space
    std::vector<std::uint64_t> rows;
    std::vector<unsigned> rpiv;
    for (std::uint64_t row : characters) {
        for (std::size_t j = 0; j < rows.size(); ++j)
            if ((row >> rpiv[j]) & 1u) row ^= rows[j];
        if (row == 0) continue;
        const unsigned piv = static_cast<unsigned>(std::countr_zero(row));
        for (std::size_t j = 0; j < rows.size(); ++j)
            if ((rows[j] >> piv) & 1u) rows[j] ^= row;
        rows.push_back(row);
        rpiv.push_back(piv);
    }
    std::vector<std::uint32_t> null_basis;
    for (unsigned f = 0; f < d; ++f) {
        if (std::find(rpiv.begin(), rpiv.end(), f) != rpiv.end()) continue;
        std::uint64_t c = std::uint64_t{1} << f;
        for (std::size_t j = 0; j < rows.size(); ++j)
            if ((rows[j] >> f) & 1u) c |= std::uint64_t{1} << rpiv[j];
        null_basis.push_back(element(c));
    }
    return Subspace(n_, std::move(null_basis));
}

// ---------------------------------------------------------------- Boxing

Boxing Boxing::trivial(unsigned n) {
    Boxing bx{Subspace::full(n), 1, {}};
    OuterBox box;
    box.x_rep = box.y_rep = box.z_rep = 0;
    std::vector<std::uint32_t> all(std::size_t{1} << n);
    for (std::uint32_t e = 0; e < all.size(); ++e) all[e] = e;
    box.B = {all};
    box.C = {all};
    box.D = {std::move(all)};
    bx.boxes.push_back(std::move(box));
    return bx;
}

unsigned require_binary_group(const PlaneSet& A) {
    if (!A.group().is_xor() || !std::has_single_bit(A.order()))
        throw DomainError("this operation needs a group of the form F_2^n");
    const unsigned n = static_cast<unsigned>(std::countr_zero(A.order()));
    if (n == 0 || n > 31) throw DomainError("F_2^n dimension out of range");
    return n;
}

// ---------------------------------------------------------------- Walsh

std::vector<double> walsh(const Subspace& W, std::span<const std::uint32_t> cell,
                          std::uint32_t basepoint) {
    const std::size_t size = W.size();
    std::vector<double> a(size, 0.0);
    for (std::uint32_t e : cell) {
        if (!W.contains(e ^ basepoint))
            throw DomainError("cell element lies outside the coset W + basepoint");
        a[W.coords(e ^ basepoint)] = 1.0;
    }
    for (std::size_t len = 1; len < size; len <<= 1)
        for (std::size_t blk = 0; blk < size; blk += 2 * len)
            for (std::size_t t = blk; t < blk + len; ++t) {
                const double u = a[t], v = a[t + len];
                a[t] = u + v;
                a[t + len] = u - v;
            }
    const double inv = 1.0 / static_cast<double>(size);
    for (double& x : a) x *= inv;
    return a;
}

std::vector<double> walsh_inverse(const Subspace& W, std::span<const double> coef) {
    const std::size_t size = W.size();
    if (coef.size() != size) throw DomainError("coefficient table size does not match |W|");
    std::vector<double> a(coef.begin(), coef.end());
    for (std::size_t len = 1; len < size; len <<= 1)
        for (std::size_t blk = 0; blk < size; blk += 2 * len)
            for (std::size_t t = blk; t < blk + len; ++t) {
                const double u = a[t], v = a[t + len];
                a[t] = u + v;
                a[t + len] = u - v;
            }
    return a;
}

// ---------------------------------------------------------------- Uniformity

UniformityAudit uniformity_audit(const Boxing& bx, double eps) {
    if (!(eps > 0.0 && eps <= 1.0)) throw DomainError("epsilon must lie in (0,1]");
    const double m3 = static_cast<double>(bx.m) * static_cast<double>(bx.m) *
                      static_cast<double>(bx.m);
    UniformityAudit audit;
    audit.threshold = eps / m3;
    audit.boxes_checked = bx.boxes.size();

    std::vector<UniformityWitness> slots(bx.boxes.size());
    std::vector<char> failing(bx.boxes.size(), 0);

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(bx.boxes.size()); ++b) {
        const OuterBox& box = bx.boxes[static_cast<std::size_t>(b)];
        UniformityWitness best;
        best.box = static_cast<std::size_t>(b);
        best.magnitude = -1.0;
        const Partition* parts[3] = {&box.B, &box.C, &box.D};
        const std::uint32_t bases[3] = {box.x_rep, box.y_rep, box.z_rep};
        for (int part = 0; part < 3; ++part) {
            const Partition& cells = *parts[part];
            for (std::size_t ci = 0; ci < cells.size(); ++ci) {
                if (cells[ci].empty()) continue;
                const auto coef = walsh(bx.W, cells[ci], bases[part]);
                for (std::size_t t = 1; t < coef.size(); ++t) {
                    const double mag = std::abs(coef[t]);
                    if (mag > best.magnitude) {
                        best.magnitude = mag;
                        best.part = part;
                        best.cell = ci;
                        best.character = t;
                    }
                }
            }
        }
        if (best.magnitude >= audit.threshold) {
            slots[static_cast<std::size_t>(b)] = best;
            failing[static_cast<std::size_t>(b)] = 1;
        }
    }
    for (std::size_t b = 0; b < bx.boxes.size(); ++b)
        if (failing[b]) audit.witnesses.push_back(slots[b]);
    return audit;
}

// ---------------------------------------------------------------- Quasirandomness

namespace {

struct InnerGraph {
    std::size_t nl = 0, nr = 0, words = 0;
    std::vector<std::uint64_t> adj;  // nl rows of `words` words
    std::int64_t edges = 0;

    bool get(std::size_t a, std::size_t b) const {
        return (adj[a * words + b / 64] >> (b % 64)) & 1u;
    }
};

bool plane_edge(const PlaneSet& A, PairType type, std::uint32_t u, std::uint32_t v) {
    switch (type) {
        case PairType::BC: return A.get(u, v);          // (x, y)
        case PairType::BD: return A.get(u, u ^ v);      // (x, z): y = x ^ z
        case PairType::CD: return A.get(u ^ v, u);      // (y, z): x = y ^ z
    }
    return false;
}

InnerGraph build_inner_graph(const PlaneSet& A, PairType type,
                             std::span<const std::uint32_t> left,
                             std::span<const std::uint32_t> right) {
    InnerGraph g;
    g.nl = left.size();
    g.nr = right.size();
    g.words = (g.nr + 63) / 64;
    g.adj.assign(g.nl * g.words, 0);
    for (std::size_t a = 0; a < g.nl; ++a)
        for (std::size_t b = 0; b < g.nr; ++b)
            if (plane_edge(A, type, left[a], right[b])) {
                g.adj[a * g.words + b / 64] |= std::uint64_t{1} << (b % 64);
                ++g.edges;
            }
    return g;
}

std::size_t min_subset_size(double eps, std::size_t n) {
    auto s = static_cast<std::size_t>(std::ceil(eps * static_cast<double>(n) - 1e-9));
    return std::max<std::size_t>(1, std::min(s, n));
}

struct WitnessIdx {
    std::vector<std::size_t> left, right;
    double density = 0.0;
};

// extreme right subsets for a fixed left prefix: given per-column counts into
// the left set, the most/least dense right subset of a fixed size is the
// top/bottom of the count order
std::optional<WitnessIdx> check_extreme_cols(const std::vector<std::int64_t>& cnt,
                                             std::size_t k, std::size_t sR, double delta,
                                             double eps,
                                             const std::vector<std::size_t>& left_rows) {
    const std::size_t b = cnt.size();
    std::vector<std::size_t> idx(b);
    std::iota(idx.begin(), idx.end(), 0);
    auto denser = [&](std::size_t x, std::size_t y) {
        return cnt[x] != cnt[y] ? cnt[x] > cnt[y] : x < y;
    };
    std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(sR) - 1, idx.end(), denser);
    std::int64_t top = 0;
    for (std::size_t t = 0; t < sR; ++t) top += cnt[idx[t]];
    const double dtop = static_cast<double>(top) / (static_cast<double>(k) * static_cast<double>(sR));
    if (std::abs(dtop - delta) >= eps) {
        WitnessIdx w;
        w.left = left_rows;
        w.right.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(sR));
        w.density = dtop;
        return w;
    }
    std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(sR) - 1, idx.end(),
                     [&](std::size_t x, std::size_t y) { return !denser(x, y); });
    std::int64_t bot = 0;
    for (std::size_t t = 0; t < sR; ++t) bot += cnt[idx[t]];
    const double dbot = static_cast<double>(bot) / (static_cast<double>(k) * static_cast<double>(sR));
    if (std::abs(dbot - delta) >= eps) {
        WitnessIdx w;
        w.left = left_rows;
        w.right.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(sR));
        w.density = dbot;
        return w;
    }
    return std::nullopt;
}

// degree-ordered prefixes of rows against extreme column subsets
std::optional<WitnessIdx> structured_search(const InnerGraph& g, double delta, double eps,
                                            std::size_t sL, std::size_t sR) {
    std::vector<std::size_t> order(g.nl);
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::int64_t> deg(g.nl, 0);
    for (std::size_t a = 0; a < g.nl; ++a)
        for (std::size_t w = 0; w < g.words; ++w)
            deg[a] += std::popcount(g.adj[a * g.words + w]);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return deg[x] != deg[y] ? deg[x] > deg[y] : x < y;
    });
    for (int dir = 0; dir < 2; ++dir) {  // densest-first, then sparsest-first
        std::vector<std::int64_t> cnt(g.nr, 0);
        std::vector<std::size_t> rows;
        rows.reserve(g.nl);
        for (std::size_t t = 0; t < g.nl; ++t) {
            const std::size_t a = dir == 0 ? order[t] : order[g.nl - 1 - t];
            rows.push_back(a);
            for (std::size_t w = 0; w < g.words; ++w) {
                std::uint64_t bits = g.adj[a * g.words + w];
                while (bits) {
                    cnt[64 * w + static_cast<unsigned>(std::countr_zero(bits))]++;
                    bits &= bits - 1;
                }
            }
            if (rows.size() < sL) continue;
            if (auto w = check_extreme_cols(cnt, rows.size(), sR, delta, eps, rows)) return w;
        }
    }
    return std::nullopt;
}

// complete decision for tiny sides: every admissible left subset against the
// extreme right subsets of every admissible size
std::optional<WitnessIdx> complete_search(const InnerGraph& g, double delta, double eps,
                                          std::size_t sL, std::size_t sR) {
    std::vector<std::int64_t> cnt(g.nr, 0);
    std::vector<std::size_t> rows, cols(g.nr);
    std::iota(cols.begin(), cols.end(), 0);
    for (std::uint32_t mask = 1; mask < (1u << g.nl); ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) < sL) continue;
        std::fill(cnt.begin(), cnt.end(), 0);
        rows.clear();
        for (std::size_t a = 0; a < g.nl; ++a)
            if ((mask >> a) & 1u) {
                rows.push_back(a);
                for (std::size_t b = 0; b < g.nr; ++b)
                    if (g.get(a, b)) ++cnt[b];
            }
        std::sort(cols.begin(), cols.end(), [&](std::size_t x, std::size_t y) {
            return cnt[x] != cnt[y] ? cnt[x] > cnt[y] : x < y;
        });
        std::int64_t prefix = 0;
        std::vector<std::int64_t> pref(g.nr + 1, 0);
        for (std::size_t b = 0; b < g.nr; ++b) {
            prefix += cnt[cols[b]];
            pref[b + 1] = prefix;
        }
        for (std::size_t l = sR; l <= g.nr; ++l) {
            const double k = static_cast<double>(rows.size());
            const double dtop = static_cast<double>(pref[l]) / (k * static_cast<double>(l));
            const double dbot =
                static_cast<double>(pref[g.nr] - pref[g.nr - l]) / (k * static_cast<double>(l));
            if (std::abs(dtop - delta) >= eps) {
                WitnessIdx w;
                w.left = rows;
                w.right.assign(cols.begin(), cols.begin() + static_cast<std::ptrdiff_t>(l));
                w.density = dtop;
                return w;
            }
            if (std::abs(dbot - delta) >= eps) {
                WitnessIdx w;
                w.left = rows;
                w.right.assign(cols.end() - static_cast<std::ptrdiff_t>(l), cols.end());
                w.density = dbot;
                return w;
            }
        }
    }
    return std::nullopt;
}

std::optional<WitnessIdx> sampled_search(const InnerGraph& g, double delta, double eps,
                                         std::size_t sL, std::size_t sR, std::uint64_t stream) {
    SplitMix64 gen(stream);
    std::vector<std::size_t> lidx(g.nl), ridx(g.nr);
    std::vector<std::uint64_t> rmask(g.words);
    constexpr int kPairs = 10'000;
    for (int it = 0; it < kPairs; ++it) {
        std::iota(lidx.begin(), lidx.end(), 0);
        std::iota(ridx.begin(), ridx.end(), 0);
        for (std::size_t t = 0; t < sL; ++t)
            std::swap(lidx[t], lidx[t + gen.next_below(g.nl - t)]);
        for (std::size_t t = 0; t < sR; ++t)
            std::swap(ridx[t], ridx[t + gen.next_below(g.nr - t)]);
        std::fill(rmask.begin(), rmask.end(), 0);
        for (std::size_t t = 0; t < sR; ++t)
            rmask[ridx[t] / 64] |= std::uint64_t{1} << (ridx[t] % 64);
        std::int64_t count = 0;
        for (std::size_t t = 0; t < sL; ++t) {
            const std::uint64_t* row = &g.adj[lidx[t] * g.words];
            for (std::size_t w = 0; w < g.words; ++w) count += std::popcount(row[w] & rmask[w]);
        }
        const double dens =
            static_cast<double>(count) / (static_cast<double>(sL) * static_cast<double>(sR));
        if (std::abs(dens - delta) >= eps) {
            WitnessIdx w;
            w.left.assign(lidx.begin(), lidx.begin() + static_cast<std::ptrdiff_t>(sL));
            w.right.assign(ridx.begin(), ridx.begin() + static_cast<std::ptrdiff_t>(sR));
            w.density = dens;
            return w;
        }
    }
    return std::nullopt;
}

std::pair<std::span<const std::uint32_t>, std::span<const std::uint32_t>> pair_cells(
    const OuterBox& box, PairType type, std::size_t i, std::size_t j) {
    switch (type) {
        case PairType::BC: return {box.B[i], box.C[j]};
        case PairType::BD: return {box.B[i], box.D[j]};
        case PairType::CD: return {box.C[i], box.D[j]};
    }
    throw InternalError("bad pair type");
}

}  // namespace

std::optional<QuasiWitness> quasirandom_audit(const PlaneSet& A, const Boxing& bx,
                                              std::size_t box, PairType type, std::size_t i,
                                              std::size_t j, double eps, std::uint64_t seed) {
    if (!(eps > 0.0 && eps <= 1.0)) throw DomainError("epsilon must lie in (0,1]");
    const auto [left, right] = pair_cells(bx.boxes[box], type, i, j);
    if (left.empty() || right.empty()) throw DomainError("quasirandom_audit needs a nonempty inner box");

    const InnerGraph g = build_inner_graph(A, type, left, right);
    const double delta =
        static_cast<double>(g.edges) / (static_cast<double>(g.nl) * static_cast<double>(g.nr));
    const std::size_t sL = min_subset_size(eps, g.nl);
    const std::size_t sR = min_subset_size(eps, g.nr);

    const bool exact_mode =
        static_cast<std::uint64_t>(g.nl) * g.nr <= (std::uint64_t{1} << 20) &&
        std::min(g.nl, g.nr) <= 20;

    std::optional<WitnessIdx> found = structured_search(g, delta, eps, sL, sR);
    if (!found && exact_mode && g.nl <= 12 && g.nr <= 12)
        found = complete_search(g, delta, eps, sL, sR);
    if (!found && !exact_mode) {
        const std::uint64_t stream = substream(
            seed, stream_tag::quasi_audit ^
                      splitmix64_fin(box * 1000003u + static_cast<std::uint64_t>(type) * 65537u +
                                     i * 257u + j));
        found = sampled_search(g, delta, eps, sL, sR, stream);
    }
    if (!found) return std::nullopt;

    QuasiWitness w;
    w.box = box;
    w.type = type;
    w.i = i;
    w.j = j;
    w.box_density = delta;
    w.subset_density = found->density;
    for (std::size_t a : found->left) w.left_subset.push_back(left[a]);
    for (std::size_t b : found->right) w.right_subset.push_back(right[b]);
    std::sort(w.left_subset.begin(), w.left_subset.end());
    std::sort(w.right_subset.begin(), w.right_subset.end());

    // re-verify against A itself before anyone refines with it
    std::int64_t count = 0;
    for (std::uint32_t u : w.left_subset)
        for (std::uint32_t v : w.right_subset)
            if (plane_edge(A, type, u, v)) ++count;
    const double dens = static_cast<double>(count) /
                        (static_cast<double>(w.left_subset.size()) *
                         static_cast<double>(w.right_subset.size()));
    const bool sizes_ok =
        static_cast<double>(w.left_subset.size()) >= eps * static_cast<double>(g.nl) - 1e-9 &&
        static_cast<double>(w.right_subset.size()) >= eps * static_cast<double>(g.nr) - 1e-9;
    if (!sizes_ok || std::abs(dens - delta) < eps - 1e-12 ||
        std::abs(dens - w.subset_density) > 1e-12)
        throw InternalError("quasirandomness witness failed re-verification");
    return w;
}

QuasiAudit quasirandom_audit_all(const PlaneSet& A, const Boxing& bx, double eps,
                                 std::uint64_t seed) {
    QuasiAudit audit;
    audit.boxes_checked = bx.boxes.size();
    audit.nonqr_mass.assign(bx.boxes.size(), {0.0, 0.0, 0.0});
    std::vector<std::vector<QuasiWitness>> per_box(bx.boxes.size());
    std::vector<char> fail(bx.boxes.size(), 0);
    const double w2 = static_cast<double>(bx.W.size()) * static_cast<double>(bx.W.size());

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(bx.boxes.size()); ++b) {
        const std::size_t bi = static_cast<std::size_t>(b);
        const OuterBox& box = bx.boxes[bi];
        std::vector<QuasiWitness> ws;
        std::array<double, 3> mass{0.0, 0.0, 0.0};
        for (int type = 0; type < 3; ++type) {
            const Partition& L = type == 0 ? box.B : (type == 1 ? box.B : box.C);
            const Partition& R = type == 0 ? box.C : box.D;
            for (std::size_t i = 0; i < L.size(); ++i) {
                if (L[i].empty()) continue;
                for (std::size_t j = 0; j < R.size(); ++j) {
                    if (R[j].empty()) continue;
                    auto w = quasirandom_audit(A, bx, bi, static_cast<PairType>(type), i, j, eps,
                                               seed);
                    if (w) {
                        mass[static_cast<std::size_t>(type)] +=
                            static_cast<double>(L[i].size()) * static_cast<double>(R[j].size()) / w2;
                        ws.push_back(std::move(*w));
                    }
                }
            }
        }
        audit.nonqr_mass[bi] = mass;
        if (mass[0] > eps || mass[1] > eps || mass[2] > eps) {
            fail[bi] = 1;
            per_box[bi] = std::move(ws);
        }
    }
    for (std::size_t b = 0; b < bx.boxes.size(); ++b)
        if (fail[b]) {
            ++audit.failing_boxes;
            for (auto& w : per_box[b]) audit.witnesses.push_back(std::move(w));
        }
    return audit;
}

// ---------------------------------------------------------------- Energies

namespace {

struct CellMaps {
    std::vector<int> of_b, of_c, of_d;  // W-coords -> cell index
    std::vector<std::int64_t> sz_b, sz_c, sz_d;
    std::uint64_t w0coords = 0;  // coords of x_rep ^ y_rep ^ z_rep (an element of W)
};

CellMaps build_cell_maps(const Boxing& bx, const OuterBox& box) {
    const std::size_t wsz = bx.W.size();
    CellMaps cm;
    cm.of_b.assign(wsz, -1);
    cm.of_c.assign(wsz, -1);
    cm.of_d.assign(wsz, -1);
    auto fill = [&](const Partition& cells, std::uint32_t base, std::vector<int>& of,
                    std::vector<std::int64_t>& sz) {
        sz.assign(cells.size(), 0);
        for (std::size_t i = 0; i < cells.size(); ++i) {
            sz[i] = static_cast<std::int64_t>(cells[i].size());
            for (std::uint32_t e : cells[i]) of[bx.W.coords(e ^ base)] = static_cast<int>(i);
        }
    };
    fill(box.B, box.x_rep, cm.of_b, cm.sz_b);
    fill(box.C, box.y_rep, cm.of_c, cm.sz_c);
    fill(box.D, box.z_rep, cm.of_d, cm.sz_d);
    cm.w0coords = bx.W.coords(box.x_rep ^ box.y_rep ^ box.z_rep);
    return cm;
}

}  // namespace

EnergyPair energies(const Boxing& bx, const PlaneSet& A) {
    const std::size_t wsz = bx.W.size();
    const double w2 = static_cast<double>(wsz) * static_cast<double>(wsz);
    std::vector<std::uint32_t> elem(wsz);
    for (std::uint64_t u = 0; u < wsz; ++u) elem[u] = bx.W.element(u);

    std::vector<double> e1p(bx.boxes.size(), 0.0), e2p(bx.boxes.size(), 0.0);

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(bx.boxes.size()); ++b) {
        const OuterBox& box = bx.boxes[static_cast<std::size_t>(b)];
        const CellMaps cm = build_cell_maps(bx, box);
        const std::size_t mb = box.B.size(), mc = box.C.size(), md = box.D.size();
        std::vector<std::int64_t> bc(mb * mc, 0), bd(mb * md, 0), cd(mc * md, 0);
        for (std::uint64_t ux = 0; ux < wsz; ++ux) {
            const std::uint32_t x = box.x_rep ^ elem[ux];
            const int ib = cm.of_b[ux];
            for (std::uint64_t uy = 0; uy < wsz; ++uy) {
                if (!A.get(x, box.y_rep ^ elem[uy])) continue;
                const std::uint64_t uz = ux ^ uy ^ cm.w0coords;
                const int ic = cm.of_c[uy], id = cm.of_d[uz];
                ++bc[static_cast<std::size_t>(ib) * mc + static_cast<std::size_t>(ic)];
                ++bd[static_cast<std::size_t>(ib) * md + static_cast<std::size_t>(id)];
                ++cd[static_cast<std::size_t>(ic) * md + static_cast<std::size_t>(id)];
            }
        }
        double e1 = 0.0;
        for (std::int64_t s : cm.sz_b) e1 += static_cast<double>(s) * static_cast<double>(s);
        for (std::int64_t s : cm.sz_c) e1 += static_cast<double>(s) * static_cast<double>(s);
        for (std::int64_t s : cm.sz_d) e1 += static_cast<double>(s) * static_cast<double>(s);
        e1 /= 3.0 * w2;

        double e2 = 0.0;
        auto add_pairs = [&](const std::vector<std::int64_t>& cnt,
                             const std::vector<std::int64_t>& szl,
                             const std::vector<std::int64_t>& szr) {
            for (std::size_t i = 0; i < szl.size(); ++i) {
                if (szl[i] == 0) continue;
                for (std::size_t j = 0; j < szr.size(); ++j) {
                    if (szr[j] == 0) continue;
                    const double c = static_cast<double>(cnt[i * szr.size() + j]);
                    e2 += c * c / (w2 * static_cast<double>(szl[i]) * static_cast<double>(szr[j]));
                }
            }
        };
        add_pairs(bc, cm.sz_b, cm.sz_c);
        add_pairs(bd, cm.sz_b, cm.sz_d);
        add_pairs(cd, cm.sz_c, cm.sz_d);
        e2 /= 3.0;

        e1p[static_cast<std::size_t>(b)] = e1;
        e2p[static_cast<std::size_t>(b)] = e2;
    }
    EnergyPair out;
    for (std::size_t b = 0; b < bx.boxes.size(); ++b) {
        out.e1 += e1p[b];
        out.e2 += e2p[b];
    }
    out.e1 /= static_cast<double>(bx.boxes.size());
    out.e2 /= static_cast<double>(bx.boxes.size());
    return out;
}

// ---------------------------------------------------------------- Refinements

Boxing refine_A(const Boxing& bx, const UniformityAudit& audit, unsigned codim_cap) {
    if (audit.witnesses.empty())
        throw DomainError("refine_A needs at least one uniformity witness");
    std::vector<std::uint64_t> chars;
    chars.reserve(audit.witnesses.size());
    for (const auto& w : audit.witnesses) {
        if (w.character == 0) throw DomainError("uniformity witness carries the trivial character");
        chars.push_back(w.character);
    }
    Subspace T = bx.W.intersect_character_kernels(chars);
    if (T.codim() > codim_cap)
        throw ResourceError("refine_A would push codim to " + std::to_string(T.codim()) +
                            ", over the cap " + std::to_string(codim_cap));

    std::unordered_map<std::uint64_t, std::size_t> old_index;
    old_index.reserve(bx.boxes.size());
    for (std::size_t b = 0; b < bx.boxes.size(); ++b)
        old_index[(static_cast<std::uint64_t>(bx.boxes[b].x_rep) << 32) | bx.boxes[b].y_rep] = b;

    Boxing out{std::move(T), bx.m, {}};
    const auto reps = out.W.coset_reps();
    out.boxes.reserve(reps.size() * reps.size());
    for (std::uint32_t xr : reps)
        for (std::uint32_t yr : reps) {
            const std::uint32_t zr = out.W.coset_rep(xr ^ yr);
            const auto it = old_index.find(
                (static_cast<std::uint64_t>(bx.W.coset_rep(xr)) << 32) | bx.W.coset_rep(yr));
            if (it == old_index.end()) throw InternalError("old outer box not found during refine_A");
            const OuterBox& old = bx.boxes[it->second];
            OuterBox nb;
            nb.x_rep = xr;
            nb.y_rep = yr;
            nb.z_rep = zr;
            auto restrict_cells = [&](const Partition& cells, std::uint32_t base) {
                Partition np(cells.size());
                for (std::size_t i = 0; i < cells.size(); ++i)
                    for (std::uint32_t e : cells[i])
                        if (out.W.contains(e ^ base)) np[i].push_back(e);
                return np;
            };
            nb.B = restrict_cells(old.B, xr);
            nb.C = restrict_cells(old.C, yr);
            nb.D = restrict_cells(old.D, zr);
            out.boxes.push_back(std::move(nb));
        }
    return out;
}

Boxing refine_B(const Boxing& bx, const std::vector<QuasiWitness>& witnesses,
                std::size_t m_cap) {
    if (witnesses.empty()) throw DomainError("refine_B needs at least one quasirandomness witness");

    // splits[box][part][cell] -> subsets to carve out simultaneously
    std::unordered_map<std::uint64_t, std::vector<const std::vector<std::uint32_t>*>> splits;
    auto key = [](std::size_t box, int part, std::size_t cell) {
        return (static_cast<std::uint64_t>(box) << 20) | (static_cast<std::uint64_t>(part) << 16) |
               cell;
    };
    for (const auto& w : witnesses) {
        const int lpart = w.type == PairType::CD ? 1 : 0;  // BC, BD split B; CD splits C
        const int rpart = w.type == PairType::BC ? 1 : 2;  // BC splits C; BD, CD split D
        splits[key(w.box, lpart, w.i)].push_back(&w.left_subset);
        splits[key(w.box, rpart, w.j)].push_back(&w.right_subset);
    }

    Boxing out{bx.W, bx.m, bx.boxes};
    std::size_t new_m = 0;
    for (std::size_t b = 0; b < out.boxes.size(); ++b) {
        OuterBox& box = out.boxes[b];
        Partition* parts[3] = {&box.B, &box.C, &box.D};
        for (int part = 0; part < 3; ++part) {
            Partition next;
            for (std::size_t ci = 0; ci < parts[part]->size(); ++ci) {
                auto it = splits.find(key(b, part, ci));
                std::vector<std::uint32_t>& cell = (*parts[part])[ci];
                if (it == splits.end()) {
                    next.push_back(std::move(cell));
                    continue;
                }
                const auto& subs = it->second;
                if (subs.size() > 63) throw ResourceError("too many simultaneous splits in one cell");
                // common refinement: group the cell by the membership signature
                std::vector<std::uint64_t> sig_order;
                std::unordered_map<std::uint64_t, std::size_t> atom_of;
                std::vector<std::vector<std::uint32_t>> atoms;
                for (std::uint32_t e : cell) {
                    std::uint64_t sig = 0;
                    for (std::size_t s = 0; s < subs.size(); ++s)
                        if (std::binary_search(subs[s]->begin(), subs[s]->end(), e))
                            sig |= std::uint64_t{1} << s;
                    auto [pos, inserted] = atom_of.try_emplace(sig, atoms.size());
                    if (inserted) atoms.emplace_back();
                    atoms[pos->second].push_back(e);
                }
                for (auto& a : atoms) next.push_back(std::move(a));
            }
            *parts[part] = std::move(next);
            new_m = std::max(new_m, parts[part]->size());
        }
    }
    if (new_m > m_cap)
        throw ResourceError("refine_B would push m to " + std::to_string(new_m) + ", over the cap " +
                            std::to_string(m_cap));
    out.m = std::max(bx.m, new_m);
    return out;
}

// ---------------------------------------------------------------- Loop

namespace {

constexpr double kEnergyTol = 1e-9;  // double-precision slack on the energy laws

double witness_sum_bound(const Boxing& bx, const std::vector<QuasiWitness>& ws, double eps) {
    const double w2 = static_cast<double>(bx.W.size()) * static_cast<double>(bx.W.size());
    double bound = 0.0;
    for (const auto& w : ws) {
        const auto [left, right] = pair_cells(bx.boxes[w.box], w.type, w.i, w.j);
        const double mass = static_cast<double>(left.size()) * static_cast<double>(right.size()) / w2;
        bound += mass * std::pow(eps, 4) / 3.0;
    }
    return bound / static_cast<double>(bx.boxes.size());
}

}  // namespace

RegularityOutcome find_regular_boxing(const PlaneSet& A, double eps, const RegularityCaps& caps,
                                      std::uint64_t seed) {
    const unsigned n = require_binary_group(A);
    if (n > caps.max_n)
        throw DomainError("set dimension " + std::to_string(n) + " exceeds the cap " +
                          std::to_string(caps.max_n));
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("epsilon must lie in (0,1)");

    RegularityOutcome out;
    out.boxing = Boxing::trivial(n);
    EnergyPair e = energies(out.boxing, A);
    out.trajectory.push_back({"init", out.boxing.W.codim(), out.boxing.m, e.e1, e.e2});

    const auto b_budget =
        static_cast<std::size_t>(std::ceil(3.0 / std::pow(eps, 6))) + 1;

    while (true) {
        // phase i: restore quasirandomness
        while (true) {
            QuasiAudit qa = quasirandom_audit_all(A, out.boxing, eps, seed);
            if (!qa.condition_failed(eps)) break;
            if (out.refine_b_calls >= b_budget)
                throw InternalError("refine_B exceeded its energy budget; E2 accounting is broken");
            const double promised = witness_sum_bound(out.boxing, qa.witnesses, eps);
            Boxing next;
            try {
                next = refine_B(out.boxing, qa.witnesses, caps.m_cap);
            } catch (const ResourceError& err) {
                out.diagnostic = err.what();
                return out;
            }
            const EnergyPair ne = energies(next, A);
            if (ne.e2 < e.e2 + promised - kEnergyTol)
                throw InternalError("refine_B increment fell short of the witness bound");
            if (ne.e2 < e.e2 + std::pow(eps, 6) / 3.0 - kEnergyTol)
                throw InternalError("refine_B increment fell short of eps^6/3");
            out.boxing = std::move(next);
            e = ne;
            ++out.refine_b_calls;
            out.trajectory.push_back({"refine_B", out.boxing.W.codim(), out.boxing.m, e.e1, e.e2});
        }

        // phase ii: restore uniformity while quasirandomness holds
        UniformityAudit ua = uniformity_audit(out.boxing, eps);
        if (!ua.condition_failed(eps)) {
            out.regular = true;
            return out;
        }
        const double m6 = std::pow(static_cast<double>(out.boxing.m), 6);
        const auto a_budget =
            static_cast<std::size_t>(std::ceil(12.0 * m6 / std::pow(eps, 3))) + 1;
        std::size_t a_calls = 0;
        while (ua.condition_failed(eps)) {
            if (++a_calls > a_budget)
                throw InternalError("refine_A exceeded its energy budget; E1 accounting is broken");
            Boxing next;
            try {
                next = refine_A(out.boxing, ua, caps.codim_cap);
            } catch (const ResourceError& err) {
                out.diagnostic = err.what();
                return out;
            }
            const EnergyPair ne = energies(next, A);
            if (next.m != out.boxing.m) throw InternalError("refine_A changed m");
            if (ne.e1 < e.e1 + std::pow(eps, 3) / (12.0 * m6) - kEnergyTol)
                throw InternalError("refine_A increment fell short of eps^3/(12 m^6)");
            if (ne.e2 < e.e2 - kEnergyTol)
                throw InternalError("refine_A decreased E2");
            out.boxing = std::move(next);
            e = ne;
            ++out.refine_a_calls;
            out.trajectory.push_back({"refine_A", out.boxing.W.codim(), out.boxing.m, e.e1, e.e2});
            ua = uniformity_audit(out.boxing, eps);
        }
        // uniformity holds again; loop to recheck quasirandomness
    }
}

// ---------------------------------------------------------------- Box kernels

BoxKernel box_kernel(const Boxing& bx, std::size_t box_index, const PlaneSet& A) {
    if (box_index >= bx.boxes.size()) throw DomainError("outer box index out of range");
    const OuterBox& box = bx.boxes[box_index];
    const std::size_t wsz = bx.W.size();
    const double w2 = static_cast<double>(wsz) * static_cast<double>(wsz);
    std::vector<std::uint32_t> elem(wsz);
    for (std::uint64_t u = 0; u < wsz; ++u) elem[u] = bx.W.element(u);
    const CellMaps cm = build_cell_maps(bx, box);
    const std::size_t mb = box.B.size(), mc = box.C.size(), md = box.D.size();

    std::vector<std::int64_t> cnt(mb * mc * md, 0);
    std::int64_t total = 0;
    for (std::uint64_t ux = 0; ux < wsz; ++ux) {
        const std::uint32_t x = box.x_rep ^ elem[ux];
        const int ib = cm.of_b[ux];
        for (std::uint64_t uy = 0; uy < wsz; ++uy) {
            if (!A.get(x, box.y_rep ^ elem[uy])) continue;
            const std::uint64_t uz = ux ^ uy ^ cm.w0coords;
            ++cnt[(static_cast<std::size_t>(ib) * mc + static_cast<std::size_t>(cm.of_c[uy])) * md +
                  static_cast<std::size_t>(cm.of_d[uz])];
            ++total;
        }
    }

    BoxKernel bk;
    bk.alpha_v = static_cast<double>(total) / w2;
    bk.kernel.p.resize(mb);
    bk.kernel.q.resize(mc);
    bk.kernel.r.resize(md);
    for (std::size_t i = 0; i < mb; ++i) bk.kernel.p[i] = static_cast<double>(cm.sz_b[i]) / static_cast<double>(wsz);
    for (std::size_t j = 0; j < mc; ++j) bk.kernel.q[j] = static_cast<double>(cm.sz_c[j]) / static_cast<double>(wsz);
    for (std::size_t k = 0; k < md; ++k) bk.kernel.r[k] = static_cast<double>(cm.sz_d[k]) / static_cast<double>(wsz);
    bk.unclipped.assign(mb * mc * md, 0.0);
    bk.kernel.values.assign(mb * mc * md, 0.0);
    for (std::size_t i = 0; i < mb; ++i)
        for (std::size_t j = 0; j < mc; ++j)
            for (std::size_t k = 0; k < md; ++k) {
                const std::size_t idx = (i * mc + j) * md + k;
                if (cm.sz_b[i] == 0 || cm.sz_c[j] == 0 || cm.sz_d[k] == 0) continue;
                const double fp = static_cast<double>(cnt[idx]) * static_cast<double>(wsz) /
                                  (static_cast<double>(cm.sz_b[i]) * static_cast<double>(cm.sz_c[j]) *
                                   static_cast<double>(cm.sz_d[k]));
                bk.unclipped[idx] = fp;
                bk.kernel.values[idx] = std::min(1.0, fp);
                const double weight = bk.kernel.p[i] * bk.kernel.q[j] * bk.kernel.r[k];
                bk.unclipped_expectation += weight * fp;
                bk.clip_loss += weight * (fp - std::min(1.0, fp));
            }
    validate(bk.kernel);
    return bk;
}

CornerCountInW corners_within_W(const PlaneSet& A, const Subspace& W) {
    const unsigned n = require_binary_group(A);
    if (W.ambient() != n) throw DomainError("subspace ambient dimension does not match the set");
    std::vector<std::uint64_t> ds;
    ds.reserve(W.size());
    for (std::uint64_t u = 0; u < W.size(); ++u) ds.push_back(W.element(u));
    const auto counts = census_for(A, ds);
    CornerCountInW out;
    out.degenerate = counts[0];  // element(0) = 0
    for (std::int64_t c : counts) out.total += c;
    return out;
}

}  // namespace corners
