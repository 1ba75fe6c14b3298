#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "corners/groups.hpp"
#include "corners/kernel.hpp"

namespace corners {

// Subgroup W of F_2^n held as a row-reduced basis of n-bit masks (each basis
// vector's top set bit is its pivot and no other vector uses that bit).
// Coset representatives are the numerically minimal masks, obtained by
// clearing all pivot bits.
class Subspace {
public:
    Subspace() : n_(1) {}  // the zero subspace of F_2^1; placeholder state
    static Subspace full(unsigned n);
    Subspace(unsigned n, std::vector<std::uint32_t> basis);

    unsigned ambient() const { return n_; }
    unsigned dim() const { return static_cast<unsigned>(basis_.size()); }
    unsigned codim() const { return n_ - dim(); }
    std::uint64_t size() const { return std::uint64_t{1} << dim(); }

    std::uint32_t element(std::uint64_t coords) const;  // coords -> mask
    std::uint64_t coords(std::uint32_t w) const;        // mask in W -> coords
    bool contains(std::uint32_t v) const;
    std::uint32_t coset_rep(std::uint32_t x) const;
    std::vector<std::uint32_t> coset_reps() const;  // 2^codim reps, increasing

    const std::vector<std::uint32_t>& basis() const { return basis_; }

    // Subspace cut out by characters (given in coordinate space): all w in W
    // with <xi, coords(w)> = 0 for every xi.
    Subspace intersect_character_kernels(std::span<const std::uint64_t> characters) const;

private:
    unsigned n_;
    std::vector<std::uint32_t> basis_;   // sorted by pivot, descending
    std::vector<unsigned> pivots_;       // pivot bit of each basis vector
};

// One cell partition of a coset of W; cells hold absolute element masks in
// ascending order. Empty cells are allowed (padding keeps m uniform).
using Partition = std::vector<std::vector<std::uint32_t>>;

struct OuterBox {
    std::uint32_t x_rep, y_rep, z_rep;
    Partition B, C, D;  // partitions of W+x, W+y, W+z
};

struct Boxing {
    Subspace W;
    std::size_t m = 1;
    std::vector<OuterBox> boxes;  // ordered by (x_rep, y_rep)

    static Boxing trivial(unsigned n);
    std::size_t box_count() const { return boxes.size(); }
};

struct EnergyPair {
    double e1 = 0.0, e2 = 0.0;
};

// --- Walsh analysis ------------------------------------------------------

// All 2^dim(W) coefficients of the indicator of (cell - basepoint) over W:
// coef[t] = E_{w in W} 1[basepoint ^ element(w) in cell] * (-1)^{<t, w>}.
// coef[0] is the cell density delta(cell).
std::vector<double> walsh(const Subspace& W, std::span<const std::uint32_t> cell,
                          std::uint32_t basepoint);

// Inverse of the above: reconstructs the indicator over coordinates.
std::vector<double> walsh_inverse(const Subspace& W, std::span<const double> coef);

// --- Audits ---------------------------------------------------------------

struct UniformityWitness {
    std::size_t box = 0;
    int part = 0;  // 0 = B, 1 = C, 2 = D
    std::size_t cell = 0;
    std::uint64_t character = 0;  // coordinate-space character, nonzero
    double magnitude = 0.0;
};

struct UniformityAudit {
    double threshold = 0.0;  // eps / m^3
    std::size_t boxes_checked = 0;
    std::vector<UniformityWitness> witnesses;  // one per failing box
    bool condition_failed(double eps) const {
        return static_cast<double>(witnesses.size()) >
               eps * static_cast<double>(boxes_checked);
    }
};

// Per cell: largest nontrivial Walsh coefficient vs eps/m^3. Returns one
// witness per failing outer box (largest magnitude; ties by smaller character
// index, then partition, then cell).
UniformityAudit uniformity_audit(const Boxing& bx, double eps);

enum class PairType { BC = 0, BD = 1, CD = 2 };

struct QuasiWitness {
    std::size_t box = 0;
    PairType type = PairType::BC;
    std::size_t i = 0, j = 0;  // left cell, right cell
    std::vector<std::uint32_t> left_subset, right_subset;  // absolute masks
    double subset_density = 0.0;
    double box_density = 0.0;
};

// Witness search for one inner box. EXACT mode (|L||R| <= 2^20 and
// min side <= 20) walks the structured family of degree-extreme subsets and,
// when both sides are <= 12, enumerates every admissible left subset against
// the extreme right subsets, which decides the property completely. SAMPLED
// mode adds 10^4 random subset pairs at the threshold sizes. A pass is
// "no witness found"; every returned witness is re-verified exactly.
std::optional<QuasiWitness> quasirandom_audit(const PlaneSet& A, const Boxing& bx,
                                              std::size_t box, PairType type, std::size_t i,
                                              std::size_t j, double eps, std::uint64_t seed);

struct QuasiAudit {
    std::size_t boxes_checked = 0;
    std::size_t failing_boxes = 0;  // some pair type has non-quasirandom mass > eps
    std::vector<std::array<double, 3>> nonqr_mass;  // per box, per type
    std::vector<QuasiWitness> witnesses;            // from failing boxes only
    bool condition_failed(double eps) const {
        return static_cast<double>(failing_boxes) > eps * static_cast<double>(boxes_checked);
    }
};

QuasiAudit quasirandom_audit_all(const PlaneSet& A, const Boxing& bx, double eps,
                                 std::uint64_t seed);

// --- Energies and refinements ---------------------------------------------

// E1 averages the squared cell densities; E2 averages delta(L) delta(R) times
// the squared A-density over inner boxes. Both lie in [0,1].
EnergyPair energies(const Boxing& bx, const PlaneSet& A);

// Replace W by the intersection of the witness characters' kernels and
// restrict every partition. m never changes; E1 gains at least
// eps^3/(12 m^6) when the witnesses cover more than an eps fraction of the
// outer boxes; E2 never decreases.
Boxing refine_A(const Boxing& bx, const UniformityAudit& audit, unsigned codim_cap);

// Split the witnessed cells (common refinement when a cell carries several
// witnesses) and pad every partition with empty cells to the new m. E2 gains
// at least 4^-codim delta(L) delta(R) eps^4 / 3 per witness, hence eps^6/3
// when the failing fractions are certified.
Boxing refine_B(const Boxing& bx, const std::vector<QuasiWitness>& witnesses,
                std::size_t m_cap);

// --- The regularity loop ---------------------------------------------------

struct RegularityCaps {
    unsigned max_n = 12;
    unsigned codim_cap = 8;
    std::size_t m_cap = 64;
};

struct TrajectoryStep {
    std::string op;  // "init", "refine_A", "refine_B"
    unsigned codim = 0;
    std::size_t m = 1;
    double e1 = 0.0, e2 = 0.0;
};

struct RegularityOutcome {
    bool regular = false;
    Boxing boxing;
    std::vector<TrajectoryStep> trajectory;
    std::string diagnostic;  // nonempty when caps were exhausted
    std::size_t refine_a_calls = 0, refine_b_calls = 0;
};

// Two-phase energy increment loop: apply (B) until quasirandomness holds,
// then (A) until uniformity holds, and recheck. Verifies the energy laws
// after every call; returns a diagnostic outcome instead of throwing when a
// cap is exhausted.
RegularityOutcome find_regular_boxing(const PlaneSet& A, double eps, const RegularityCaps& caps,
                                      std::uint64_t seed);

// --- Box kernels and counting ----------------------------------------------

struct BoxKernel {
    DiscreteKernel kernel;          // clipped values, marginals delta(B_i) etc.
    std::vector<double> unclipped;  // f' = count |W| / (|B||C||D|)
    double unclipped_expectation = 0.0;  // equals alpha_v exactly
    double alpha_v = 0.0;                // |A cap V| / |P cap V|
    double clip_loss = 0.0;              // E(f' - f)
};

BoxKernel box_kernel(const Boxing& bx, std::size_t box, const PlaneSet& A);

struct CornerCountInW {
    std::int64_t total = 0;       // corners (x, y, d) with d in W, including d = 0
    std::int64_t degenerate = 0;  // the d = 0 term, |A|
};

CornerCountInW corners_within_W(const PlaneSet& A, const Subspace& W);

// A's group must be F_2^n (all components mod 2); returns n.
unsigned require_binary_group(const PlaneSet& A);

}  // namespace corners
