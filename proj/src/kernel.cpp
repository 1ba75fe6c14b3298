#include "corners/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "corners/errors.hpp"

namespace corners {

DiscreteKernel DiscreteKernel::constant(std::size_t mx, std::size_t my, std::size_t mz,
                                        double v) {
    DiscreteKernel k;
    k.p.assign(mx, 1.0 / static_cast<double>(mx));
    k.q.assign(my, 1.0 / static_cast<double>(my));
    k.r.assign(mz, 1.0 / static_cast<double>(mz));
    k.values.assign(mx * my * mz, v);
    return k;
}

namespace {

void check_marginal(const std::vector<double>& m, const char* name) {
    if (m.empty()) throw ValidationError(std::string("marginal ") + name + " is empty");
    double sum = 0.0;
    for (double v : m) {
        if (!(v >= 0.0)) throw ValidationError(std::string("marginal ") + name + " has a negative entry");
        sum += v;
    }
    if (std::abs(sum - 1.0) > kSumTolerance)
        throw ValidationError(std::string("marginal ") + name + " sums to " + std::to_string(sum) +
                              ", not 1 within 1e-12 (renormalization is an explicit opt-in)");
}

void check_values(const std::vector<double>& values, std::size_t cells) {
    if (values.size() != cells)
        throw ValidationError("values size " + std::to_string(values.size()) +
                              " does not match shape cell count " + std::to_string(cells));
    for (double v : values)
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("values entry outside [0,1]");
}

void check_cuts(const std::vector<double>& cuts, const char* name) {
    if (cuts.size() < 2) throw ValidationError(std::string(name) + " needs at least two cut points");
    if (std::abs(cuts.front()) > kSumTolerance)
        throw ValidationError(std::string(name) + " must start at 0");
    if (std::abs(cuts.back() - 1.0) > kSumTolerance)
        throw ValidationError(std::string(name) + " must end at 1");
    for (std::size_t i = 1; i < cuts.size(); ++i)
        if (cuts[i] < cuts[i - 1]) throw ValidationError(std::string(name) + " is not nondecreasing");
}

}  // namespace

void validate(const DiscreteKernel& k) {
    check_marginal(k.p, "p");
    check_marginal(k.q, "q");
    check_marginal(k.r, "r");
    check_values(k.values, k.cell_count());
}

void validate(const PiecewiseKernel& pk) {
    check_cuts(pk.x_cuts, "x_cuts");
    check_cuts(pk.y_cuts, "y_cuts");
    check_cuts(pk.z_cuts, "z_cuts");
    check_values(pk.values, pk.mx() * pk.my() * pk.mz());
}

DiscreteKernel renormalized(DiscreteKernel k) {
    for (auto* m : {&k.p, &k.q, &k.r}) {
        double sum = 0.0;
        for (double v : *m) sum += v;
        if (sum <= 0.0) throw ValidationError("cannot renormalize a marginal with nonpositive sum");
        for (double& v : *m) v /= sum;
    }
    return k;
}

namespace detail {

double expectation_raw(std::span<const double> p, std::span<const double> q,
                       std::span<const double> r, std::span<const double> values) {
    const std::size_t my = q.size(), mz = r.size();
    std::vector<double> partial(p.size(), 0.0);
#pragma omp parallel for schedule(static) if (values.size() > 1u << 16)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(p.size()); ++i) {
        double si = 0.0;
        for (std::size_t j = 0; j < my; ++j) {
            const double* v = &values[(static_cast<std::size_t>(i) * my + j) * mz];
            double sj = 0.0;
            for (std::size_t c = 0; c < mz; ++c) sj += r[c] * v[c];
            si += q[j] * sj;
        }
        partial[static_cast<std::size_t>(i)] = si;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) total += p[i] * partial[i];
    return total;
}

namespace {

// the three conditionals of the value tensor under (p, q, r)
void conditionals_raw(std::span<const double> p, std::span<const double> q,
                      std::span<const double> r, std::span<const double> values,
                      std::vector<double>& f3, std::vector<double>& f2,
                      std::vector<double>& f1) {
    const std::size_t mx = p.size(), my = q.size(), mz = r.size();
    f3.assign(mx * my, 0.0);
    f2.assign(mx * mz, 0.0);
    f1.assign(my * mz, 0.0);
    for (std::size_t i = 0; i < mx; ++i)
        for (std::size_t j = 0; j < my; ++j) {
            const double* v = &values[(i * my + j) * mz];
            double sxy = 0.0;
            for (std::size_t c = 0; c < mz; ++c) {
                sxy += r[c] * v[c];
                f2[i * mz + c] += q[j] * v[c];
                f1[j * mz + c] += p[i] * v[c];
            }
            f3[i * my + j] = sxy;
        }
}

}  // namespace

double t_value_raw(std::span<const double> p, std::span<const double> q,
                   std::span<const double> r, std::span<const double> values) {
    const std::size_t mx = p.size(), my = q.size(), mz = r.size();
    std::vector<double> f3, f2, f1;
    conditionals_raw(p, q, r, values, f3, f2, f1);
    std::vector<double> partial(mx, 0.0);
#pragma omp parallel for schedule(static) if (mx * my * mz > 1u << 16)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(mx); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        double si = 0.0;
        for (std::size_t j = 0; j < my; ++j) {
            const double w3 = f3[i * my + j];
            const double* a2 = &f2[i * mz];
            const double* a1 = &f1[j * mz];
            double sj = 0.0;
            for (std::size_t c = 0; c < mz; ++c) sj += r[c] * a2[c] * a1[c];
            si += q[j] * w3 * sj;
        }
        partial[i] = si;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < mx; ++i) total += p[i] * partial[i];
    return total;
}

}  // namespace detail

double expectation(const DiscreteKernel& k) {
    validate(k);
    return detail::expectation_raw(k.p, k.q, k.r, k.values);
}

std::vector<double> conditional_xy(const DiscreteKernel& k) {
    validate(k);
    std::vector<double> out(k.mx() * k.my(), 0.0);
    for (std::size_t i = 0; i < k.mx(); ++i)
        for (std::size_t j = 0; j < k.my(); ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < k.mz(); ++c) s += k.r[c] * k.at(i, j, c);
            out[i * k.my() + j] = s;
        }
    return out;
}

std::vector<double> conditional_xz(const DiscreteKernel& k) {
    validate(k);
    std::vector<double> out(k.mx() * k.mz(), 0.0);
    for (std::size_t i = 0; i < k.mx(); ++i)
        for (std::size_t c = 0; c < k.mz(); ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < k.my(); ++j) s += k.q[j] * k.at(i, j, c);
            out[i * k.mz() + c] = s;
        }
    return out;
}

std::vector<double> conditional_yz(const DiscreteKernel& k) {
    validate(k);
    std::vector<double> out(k.my() * k.mz(), 0.0);
    for (std::size_t j = 0; j < k.my(); ++j)
        for (std::size_t c = 0; c < k.mz(); ++c) {
            double s = 0.0;
            for (std::size_t i = 0; i < k.mx(); ++i) s += k.p[i] * k.at(i, j, c);
            out[j * k.mz() + c] = s;
        }
    return out;
}

double t_value(const DiscreteKernel& k) {
    validate(k);
    return detail::t_value_raw(k.p, k.q, k.r, k.values);
}

namespace {

std::vector<double> kron_marginal(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size() * b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i * b.size() + j] = a[i] * b[j];
    return out;
}

}  // namespace

DiscreteKernel tensor_power(const DiscreteKernel& k, unsigned n, std::size_t cell_budget) {
    validate(k);
    if (n == 0) throw DomainError("tensor power requires n >= 1");

    // overflow-safe size check
    long double cells = 1.0L;
    for (unsigned t = 0; t < n; ++t) cells *= static_cast<long double>(k.cell_count());
    if (cells > static_cast<long double>(cell_budget)) {
        long double dx = std::pow(static_cast<long double>(k.mx()), n);
        long double dy = std::pow(static_cast<long double>(k.my()), n);
        long double dz = std::pow(static_cast<long double>(k.mz()), n);
        throw ResourceError("tensor_power would allocate " + std::to_string(static_cast<double>(cells)) +
                            " cells (" + std::to_string(static_cast<double>(dx)) + " x " +
                            std::to_string(static_cast<double>(dy)) + " x " +
                            std::to_string(static_cast<double>(dz)) + "), over the budget of " +
                            std::to_string(cell_budget));
    }

    DiscreteKernel out;
    out.p = {1.0};
    out.q = {1.0};
    out.r = {1.0};
    out.values = {1.0};
    for (unsigned t = 0; t < n; ++t) {
        DiscreteKernel next;
        next.p = kron_marginal(out.p, k.p);
        next.q = kron_marginal(out.q, k.q);
        next.r = kron_marginal(out.r, k.r);
        next.values.resize(out.values.size() * k.values.size());
        const std::size_t MY = out.my(), MZ = out.mz();
        const std::size_t my2 = k.my(), mz2 = k.mz();
        for (std::size_t I = 0; I < out.mx(); ++I)
            for (std::size_t J = 0; J < MY; ++J)
                for (std::size_t K = 0; K < MZ; ++K) {
                    const double base = out.values[(I * MY + J) * MZ + K];
                    for (std::size_t i = 0; i < k.mx(); ++i)
                        for (std::size_t j = 0; j < my2; ++j)
                            for (std::size_t c = 0; c < mz2; ++c)
                                next.at(I * k.mx() + i, J * my2 + j, K * mz2 + c) =
                                    base * k.at(i, j, c);
                }
        out = std::move(next);
    }
    return out;
}

DiscreteKernel scale(DiscreteKernel k, double beta) {
    validate(k);
    if (!(beta >= 0.0 && beta <= 1.0)) throw DomainError("scale factor must lie in [0,1]");
    for (double& v : k.values) v *= beta;
    return k;
}

DiscreteKernel epsilon_mix(DiscreteKernel k, double eps) {
    validate(k);
    if (!(eps >= 0.0 && eps <= 1.0)) throw DomainError("mix parameter must lie in [0,1]");
    for (double& v : k.values) v = eps + (1.0 - eps) * v;
    return k;
}

DiscreteKernel from_piecewise(const PiecewiseKernel& pk) {
    validate(pk);
    DiscreteKernel k;
    auto diffs = [](const std::vector<double>& cuts) {
        std::vector<double> d(cuts.size() - 1);
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) d[i] = cuts[i + 1] - cuts[i];
        return d;
    };
    k.p = diffs(pk.x_cuts);
    k.q = diffs(pk.y_cuts);
    k.r = diffs(pk.z_cuts);
    k.values = pk.values;
    validate(k);
    return k;
}

PiecewiseKernel to_piecewise(const DiscreteKernel& k) {
    validate(k);
    PiecewiseKernel pk;
    auto cumulative = [](const std::vector<double>& m) {
        std::vector<double> cuts(m.size() + 1, 0.0);
        for (std::size_t i = 0; i < m.size(); ++i) cuts[i + 1] = cuts[i] + m[i];
        cuts.back() = 1.0;  // the sum is 1 within tolerance; pin the endpoint
        return cuts;
    };
    pk.x_cuts = cumulative(k.p);
    pk.y_cuts = cumulative(k.q);
    pk.z_cuts = cumulative(k.r);
    pk.values = k.values;
    return pk;
}

bool exact_eligible(const DiscreteKernel& k, std::size_t max_cells) {
    if (k.cell_count() > max_cells) return false;
    for (const auto* m : {&k.p, &k.q, &k.r}) {
        BigRat sum(0);
        for (double v : *m) {
            if (!(v >= 0.0)) return false;
            sum += rational_from_double(v);
        }
        if (sum != 1) return false;
    }
    for (double v : k.values)
        if (!(v >= 0.0 && v <= 1.0)) return false;
    return true;
}

namespace {

std::vector<BigRat> to_rats(const std::vector<double>& xs) {
    std::vector<BigRat> out;
    out.reserve(xs.size());
    for (double x : xs) out.push_back(rational_from_double(x));
    return out;
}

}  // namespace

BigRat expectation_exact(const DiscreteKernel& k) {
    validate(k);
    const auto p = to_rats(k.p), q = to_rats(k.q), r = to_rats(k.r), v = to_rats(k.values);
    BigRat total(0);
    const std::size_t my = k.my(), mz = k.mz();
    for (std::size_t i = 0; i < k.mx(); ++i)
        for (std::size_t j = 0; j < my; ++j)
            for (std::size_t c = 0; c < mz; ++c)
                total += p[i] * q[j] * r[c] * v[(i * my + j) * mz + c];
    return total;
}

BigRat t_value_exact(const DiscreteKernel& k) {
    validate(k);
    const auto p = to_rats(k.p), q = to_rats(k.q), r = to_rats(k.r), v = to_rats(k.values);
    const std::size_t mx = k.mx(), my = k.my(), mz = k.mz();
    std::vector<BigRat> f3(mx * my, BigRat(0)), f2(mx * mz, BigRat(0)), f1(my * mz, BigRat(0));
    for (std::size_t i = 0; i < mx; ++i)
        for (std::size_t j = 0; j < my; ++j)
            for (std::size_t c = 0; c < mz; ++c) {
                const BigRat& val = v[(i * my + j) * mz + c];
                f3[i * my + j] += r[c] * val;
                f2[i * mz + c] += q[j] * val;
                f1[j * mz + c] += p[i] * val;
            }
    BigRat total(0);
    for (std::size_t i = 0; i < mx; ++i)
        for (std::size_t j = 0; j < my; ++j)
            for (std::size_t c = 0; c < mz; ++c)
                total += p[i] * q[j] * r[c] * f3[i * my + j] * f2[i * mz + c] * f1[j * mz + c];
    return total;
}

}  // namespace corners
