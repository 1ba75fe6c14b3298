#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "corners/rational.hpp"

namespace corners {

// A trio of independent finitely-valued random coordinates (laws p, q, r)
// together with a value tensor f in [0,1]. This is the discrete form of a
// piecewise constant function on [0,1]^3, and the object everything else
// evaluates: alpha = E(f) and the trilinear functional
//
//   T(f) = E( E(f|X,Y) * E(f|X,Z) * E(f|Y,Z) ).
struct DiscreteKernel {
    std::vector<double> p, q, r;
    std::vector<double> values;  // shape mx*my*mz, z index fastest

    std::size_t mx() const { return p.size(); }
    std::size_t my() const { return q.size(); }
    std::size_t mz() const { return r.size(); }
    std::size_t cell_count() const { return p.size() * q.size() * r.size(); }

    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return values[(i * my() + j) * mz() + k];
    }
    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return values[(i * my() + j) * mz() + k];
    }

    static DiscreteKernel constant(std::size_t mx, std::size_t my, std::size_t mz, double v);
};

// Piecewise constant function on [0,1]^3: cut sequences 0 = t_0 <= ... <= t_m = 1
// per axis and one constant per cell. Zero-width cells are allowed.
struct PiecewiseKernel {
    std::vector<double> x_cuts, y_cuts, z_cuts;
    std::vector<double> values;  // shape (x_cuts-1)*(y_cuts-1)*(z_cuts-1), z fastest

    std::size_t mx() const { return x_cuts.size() - 1; }
    std::size_t my() const { return y_cuts.size() - 1; }
    std::size_t mz() const { return z_cuts.size() - 1; }
};

inline constexpr double kSumTolerance = 1e-12;

// Throw ValidationError naming the violated invariant.
void validate(const DiscreteKernel& k);
void validate(const PiecewiseKernel& pk);

// Explicit opt-in rescale of the marginals to sum to one; never applied silently.
DiscreteKernel renormalized(DiscreteKernel k);

double expectation(const DiscreteKernel& k);

// f3 = E(f|X,Y) as mx*my, f2 = E(f|X,Z) as mx*mz, f1 = E(f|Y,Z) as my*mz.
std::vector<double> conditional_xy(const DiscreteKernel& k);
std::vector<double> conditional_xz(const DiscreteKernel& k);
std::vector<double> conditional_yz(const DiscreteKernel& k);

double t_value(const DiscreteKernel& k);

inline constexpr std::size_t kDefaultCellBudget = 10'000'000;

// n-fold tensor power: marginals and values multiply coordinatewise, so both
// E and T are raised to the n-th power. Refuses to allocate past the budget.
DiscreteKernel tensor_power(const DiscreteKernel& k, unsigned n,
                            std::size_t cell_budget = kDefaultCellBudget);

DiscreteKernel scale(DiscreteKernel k, double beta);        // values *= beta
DiscreteKernel epsilon_mix(DiscreteKernel k, double eps);   // values -> eps + (1-eps)*values

DiscreteKernel from_piecewise(const PiecewiseKernel& pk);
PiecewiseKernel to_piecewise(const DiscreteKernel& k);

// Exact evaluation for kernels whose marginals sum to exactly one as dyadic
// rationals (doubles are always dyadic; the sums are what can fail) and whose
// cell count is small enough for exact arithmetic to be cheap.
bool exact_eligible(const DiscreteKernel& k, std::size_t max_cells = 4096);
BigRat expectation_exact(const DiscreteKernel& k);
BigRat t_value_exact(const DiscreteKernel& k);

namespace detail {

// Unvalidated evaluation on raw storage; used by the optimizer's inner loop
// and by finite-difference probes that step outside [0,1].
double expectation_raw(std::span<const double> p, std::span<const double> q,
                       std::span<const double> r, std::span<const double> values);
double t_value_raw(std::span<const double> p, std::span<const double> q,
                   std::span<const double> r, std::span<const double> values);

}  // namespace detail

}  // namespace corners
