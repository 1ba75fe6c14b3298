#include "corners/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "corners/errors.hpp"
#include "corners/rng.hpp"

namespace corners {

double envelope_exponent_c() { return std::log(26.0 / 27.0) / std::log(3.0 / 4.0); }

std::pair<double, double> envelope(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("envelope needs alpha in [0,1]");
    const double lower = alpha * alpha * alpha * alpha;
    const double upper = alpha == 0.0 ? 0.0 : (27.0 / 26.0) * std::pow(alpha, 3.0 + envelope_exponent_c());
    return {lower, upper};
}

std::vector<double> t_gradient(const DiscreteKernel& k) {
    validate(k);
    const std::size_t mx = k.mx(), my = k.my(), mz = k.mz();
    const auto f3 = conditional_xy(k);  // mx*my
    const auto f2 = conditional_xz(k);  // mx*mz
    const auto f1 = conditional_yz(k);  // my*mz

    // values[a,b,c] enters each of the three conditionals exactly once, so
    //   dT/dv[a,b,c] = p_a q_b r_c (G1[a,b] + G2[a,c] + G3[b,c])
    // with the three partial products below.
    std::vector<double> G1(mx * my, 0.0), G2(mx * mz, 0.0), G3(my * mz, 0.0);
    for (std::size_t a = 0; a < mx; ++a)
        for (std::size_t b = 0; b < my; ++b) {
            double s = 0.0;
            for (std::size_t c = 0; c < mz; ++c) s += k.r[c] * f2[a * mz + c] * f1[b * mz + c];
            G1[a * my + b] = s;
        }
    for (std::size_t a = 0; a < mx; ++a)
        for (std::size_t c = 0; c < mz; ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < my; ++j) s += k.q[j] * f3[a * my + j] * f1[j * mz + c];
            G2[a * mz + c] = s;
        }
    for (std::size_t b = 0; b < my; ++b)
        for (std::size_t c = 0; c < mz; ++c) {
            double s = 0.0;
            for (std::size_t i = 0; i < mx; ++i) s += k.p[i] * f3[i * my + b] * f2[i * mz + c];
            G3[b * mz + c] = s;
        }

    std::vector<double> grad(mx * my * mz, 0.0);
    for (std::size_t a = 0; a < mx; ++a)
        for (std::size_t b = 0; b < my; ++b)
            for (std::size_t c = 0; c < mz; ++c)
                grad[(a * my + b) * mz + c] =
                    k.p[a] * k.q[b] * k.r[c] *
                    (G1[a * my + b] + G2[a * mz + c] + G3[b * mz + c]);
    return grad;
}

namespace {

std::vector<double> project_raw(const std::vector<double>& t, const std::vector<double>& w,
                                double alpha) {
    double tmin = t[0], tmax = t[0];
    for (double v : t) {
        tmin = std::min(tmin, v);
        tmax = std::max(tmax, v);
    }
    double lo = -tmax, hi = 1.0 - tmin;  // expectation 0 at lo, 1 at hi
    auto expect_at = [&](double lambda) {
        double e = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i)
            e += w[i] * std::clamp(t[i] + lambda, 0.0, 1.0);
        return e;
    };
    for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (expect_at(mid) < alpha)
            lo = mid;
        else
            hi = mid;
    }
    const double lambda = 0.5 * (lo + hi);
    std::vector<double> out(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = std::clamp(t[i] + lambda, 0.0, 1.0);
    return out;
}

std::vector<double> cell_weights(const std::vector<double>& p, const std::vector<double>& q,
                                 const std::vector<double>& r) {
    std::vector<double> w(p.size() * q.size() * r.size());
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < q.size(); ++j)
            for (std::size_t c = 0; c < r.size(); ++c)
                w[(i * q.size() + j) * r.size() + c] = p[i] * q[j] * r[c];
    return w;
}

}  // namespace

DiscreteKernel project_feasible(std::vector<double> tensor, std::vector<double> p,
                                std::vector<double> q, std::vector<double> r, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw DomainError("projection target alpha must lie in [0,1]");
    if (tensor.size() != p.size() * q.size() * r.size())
        throw ValidationError("tensor size does not match marginals");
    const auto w = cell_weights(p, q, r);
    DiscreteKernel k;
    k.values = project_raw(tensor, w, alpha);
    k.p = std::move(p);
    k.q = std::move(q);
    k.r = std::move(r);
    validate(k);
    return k;
}

namespace {

struct RestartResult {
    std::vector<double> values;
    double t = 1.0;
    std::vector<std::string> violations;
};

RestartResult run_restart(const OptimizeConfig& cfg, const std::vector<double>& p,
                          const std::vector<double>& q, const std::vector<double>& r,
                          const std::vector<double>& w, int restart) {
    const std::size_t cells = w.size();
    RestartResult res;

    if (restart == 0) {
        res.values.assign(cells, cfg.alpha);
    } else {
        SplitMix64 gen(substream(cfg.seed, stream_tag::optimizer + static_cast<std::uint64_t>(restart)));
        std::vector<double> raw(cells);
        for (double& v : raw) v = gen.next_u01();
        res.values = project_raw(raw, w, cfg.alpha);
    }

    DiscreteKernel k;
    k.p = p;
    k.q = q;
    k.r = r;
    k.values = res.values;
    double t = detail::t_value_raw(k.p, k.q, k.r, k.values);

    auto check_feasible = [&](const std::vector<double>& v) {
        const double e = detail::expectation_raw(p, q, r, v);
        if (std::abs(e - cfg.alpha) > 1e-10)
            res.violations.push_back("restart " + std::to_string(restart) +
                                     ": iterate expectation off target by " +
                                     std::to_string(e - cfg.alpha));
        for (double x : v)
            if (!(x >= 0.0 && x <= 1.0)) {
                res.violations.push_back("restart " + std::to_string(restart) +
                                         ": iterate outside the unit box");
                break;
            }
    };
    check_feasible(k.values);

    double step = cfg.step.initial;
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        k.values.swap(res.values);
        const auto g = t_gradient(k);
        k.values.swap(res.values);

        bool accepted = false;
        double s = step * cfg.step.grow;
        std::vector<double> trial(cells);
        for (int bt = 0; bt < cfg.step.max_backtracks; ++bt) {
            for (std::size_t i = 0; i < cells; ++i) trial[i] = res.values[i] - s * g[i];
            trial = project_raw(trial, w, cfg.alpha);
            const double tt = detail::t_value_raw(p, q, r, trial);
            if (tt < t - cfg.tolerance) {
                res.values.swap(trial);
                t = tt;
                step = s;
                accepted = true;
                break;
            }
            s *= cfg.step.shrink;
        }
        if (!accepted) break;  // no descent step left: converged
        check_feasible(res.values);
    }
    res.t = t;
    return res;
}

}  // namespace

OptimizeReport minimize_t(const OptimizeConfig& cfg) {
    if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0))
        throw DomainError("minimize_t needs alpha in [0,1]");
    if (cfg.restarts < 1 || cfg.max_iters < 1)
        throw ValidationError("restarts and max_iters must be >= 1");
    for (std::size_t d : cfg.shape)
        if (d < 1) throw ValidationError("shape dimensions must be >= 1");

    std::vector<double> p(cfg.shape[0], 1.0 / static_cast<double>(cfg.shape[0]));
    std::vector<double> q(cfg.shape[1], 1.0 / static_cast<double>(cfg.shape[1]));
    std::vector<double> r(cfg.shape[2], 1.0 / static_cast<double>(cfg.shape[2]));
    const auto w = cell_weights(p, q, r);

    std::vector<RestartResult> results(static_cast<std::size_t>(cfg.restarts));
#pragma omp parallel for schedule(dynamic)
    for (int rs = 0; rs < cfg.restarts; ++rs)
        results[static_cast<std::size_t>(rs)] = run_restart(cfg, p, q, r, w, rs);

    OptimizeReport rep;
    rep.config = cfg;
    rep.trajectory.reserve(results.size());
    int best = 0;
    for (int rs = 0; rs < cfg.restarts; ++rs) {
        rep.trajectory.push_back(results[static_cast<std::size_t>(rs)].t);
        for (auto& v : results[static_cast<std::size_t>(rs)].violations)
            rep.violations.push_back(std::move(v));
        if (results[static_cast<std::size_t>(rs)].t < results[static_cast<std::size_t>(best)].t)
            best = rs;  // ties keep the lower restart index
    }
    rep.best_restart = best;
    rep.best_kernel.p = std::move(p);
    rep.best_kernel.q = std::move(q);
    rep.best_kernel.r = std::move(r);
    rep.best_kernel.values = std::move(results[static_cast<std::size_t>(best)].values);
    rep.best_t = results[static_cast<std::size_t>(best)].t;

    const double recomputed = t_value(rep.best_kernel);
    if (std::abs(recomputed - rep.best_t) > 1e-10)
        throw InternalError("best_t does not match t_value(best_kernel)");

    const auto [lower, upper] = envelope(cfg.alpha);
    rep.envelope_lower = lower;
    rep.envelope_upper = upper;
    if (rep.best_t < lower - 1e-9)
        throw InternalError("best_t fell below the alpha^4 envelope; T evaluation is broken");
    rep.upper_warning = rep.best_t > upper + 1e-9;
    return rep;
}

std::vector<SweepRow> sweep(const OptimizeConfig& base, const std::vector<double>& alphas) {
    std::vector<SweepRow> rows;
    rows.reserve(alphas.size());
    for (double a : alphas) {
        OptimizeConfig cfg = base;
        cfg.alpha = a;
        const auto rep = minimize_t(cfg);
        rows.push_back({a, rep.best_t, rep.envelope_lower, rep.envelope_upper});
    }
    return rows;
}

std::vector<double> parse_alphas(const std::string& text) {
    std::vector<double> out;
    if (text.find(':') != std::string::npos) {
        double a = 0, b = 0, step = 0;
        char c1 = 0, c2 = 0;
        std::istringstream in(text);
        if (!(in >> a >> c1 >> b >> c2 >> step) || c1 != ':' || c2 != ':' || step <= 0)
            throw ValidationError("alpha range must look like a:b:step");
        const int count = static_cast<int>(std::floor((b - a) / step + 0.5)) + 1;
        for (int i = 0; i < count; ++i) out.push_back(a + step * i);
    } else {
        std::istringstream in(text);
        std::string tok;
        while (std::getline(in, tok, ',')) {
            if (tok.empty()) continue;
            try {
                std::size_t used = 0;
                const double v = std::stod(tok, &used);
                if (used != tok.size()) throw ValidationError("bad alpha token '" + tok + "'");
                out.push_back(v);
            } catch (const std::logic_error&) {
                throw ValidationError("bad alpha token '" + tok + "'");
            }
        }
    }
    if (out.empty()) throw ValidationError("no alphas given");
    for (double a : out)
        if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("sweep alphas must lie in [0,1]");
    return out;
}

}  // namespace corners
