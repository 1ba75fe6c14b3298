// corners: one CLI over the kernel/optimizer/census/construction/regularity
// library. Every subcommand reads file or stdin inputs, writes file or stdout
// outputs, and emits a one-line JSON run manifest on stderr.

#include <chrono>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "corners/errors.hpp"
#include "corners/io.hpp"
#include "corners/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace corners;

namespace {

struct ManifestScope {
    RunManifest m;
    std::string save_path;  // optional extra copy
    int threads = 0;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void hash_input(const std::string& path, const std::string& bytes) {
        m.input_hashes[path] = fnv1a64_hex(bytes);
    }
    void emit() {
        m.config["threads"] = threads;  // results never depend on it; recorded anyway
        m.duration_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - start)
                            .count();
        const std::string line = manifest_to_json(m).dump();
        std::cerr << line << "\n";
        if (!save_path.empty()) write_output(save_path, line + "\n");
    }
};

DiscreteKernel load_kernel(const std::string& path, bool renorm, ManifestScope& ms) {
    const std::string bytes = read_input(path);
    ms.hash_input(path, bytes);
    const auto j = parse_json(bytes);
    DiscreteKernel k = json_is_piecewise(j) ? from_piecewise(piecewise_from_json(j))
                                            : kernel_from_json(j);
    if (renorm) k = renormalized(k);
    validate(k);
    return k;
}

PlaneSet load_planeset(const std::string& path, ManifestScope& ms) {
    const std::string bytes = read_input(path);
    ms.hash_input(path, bytes);
    return planeset_from_text(bytes);
}

std::array<std::size_t, 3> parse_shape(const std::string& text) {
    std::array<std::size_t, 3> shape{};
    if (std::sscanf(text.c_str(), "%zu,%zu,%zu", &shape[0], &shape[1], &shape[2]) != 3)
        throw ValidationError("shape must look like 2,2,2");
    return shape;
}

// exact fractions are printed only while they stay readable; a dyadic kernel
// built from decimals like 0.1 is still exact but its denominator is 2^60-ish
bool printable_rational(const BigRat& r) {
    return boost::multiprecision::denominator(r) < (BigInt(1) << 31);
}

std::string format_value(double dec, const BigRat& exact, bool use_exact) {
    if (use_exact && printable_rational(exact)) return format_rational(exact);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", dec);
    return buf;
}

int run(int argc, char** argv) {
    CLI::App app{"corner-census and trilinear-functional toolkit"};
    app.require_subcommand(1);
    int threads = 0;
    std::string manifest_path;
    app.add_option("--threads", threads, "worker thread cap (0 = hardware default)");
    app.add_option("--manifest", manifest_path, "also write the run manifest to this file");
    app.set_version_flag("--version", std::string("corners ") + kToolVersion);

    // ---- tfunc ----------------------------------------------------------
    auto* tfunc = app.add_subcommand("tfunc", "evaluate and transform kernels");
    tfunc->require_subcommand(1);
    std::string tf_in = "-", tf_out = "-";
    bool tf_renorm = false;
    unsigned tf_n = 2;
    std::size_t tf_budget = kDefaultCellBudget;
    double tf_beta = 1.0, tf_eps = 0.0;

    auto add_common = [&](CLI::App* c, bool with_out) {
        c->add_option("file", tf_in, "kernel JSON file, '-' for stdin");
        c->add_flag("--renormalize", tf_renorm, "rescale marginals to sum to 1 before validating");
        if (with_out) c->add_option("--out", tf_out, "output file, '-' for stdout");
    };
    auto* tf_eval = tfunc->add_subcommand("eval", "print alpha and T");
    add_common(tf_eval, false);
    auto* tf_tensor = tfunc->add_subcommand("tensor", "n-fold tensor power");
    add_common(tf_tensor, true);
    tf_tensor->add_option("--n", tf_n, "tensor power")->required();
    tf_tensor->add_option("--max-cells", tf_budget, "cell budget for the result");
    auto* tf_scale = tfunc->add_subcommand("scale", "multiply values by beta");
    add_common(tf_scale, true);
    tf_scale->add_option("--beta", tf_beta, "scale factor in [0,1]")->required();
    auto* tf_mix = tfunc->add_subcommand("mix", "values -> eps + (1-eps) values");
    add_common(tf_mix, true);
    tf_mix->add_option("--epsilon", tf_eps, "mix parameter in [0,1]")->required();
    auto* tf_convert = tfunc->add_subcommand("convert", "discrete <-> piecewise");
    add_common(tf_convert, true);

    // ---- optimize -------------------------------------------------------
    auto* opt = app.add_subcommand("optimize", "minimize T at fixed expectation");
    opt->require_subcommand(1);
    OptimizeConfig base_cfg;
    std::string opt_shape = "2,2,2", opt_out = "-", opt_cfg_path, opt_alphas;
    auto add_opt_flags = [&](CLI::App* c) {
        c->add_option("--shape", opt_shape, "grid shape, e.g. 3,3,3");
        c->add_option("--restarts", base_cfg.restarts, "random restarts");
        c->add_option("--max-iters", base_cfg.max_iters, "iteration cap per restart");
        c->add_option("--seed", base_cfg.seed, "master seed");
        c->add_option("--tolerance", base_cfg.tolerance, "minimum accepted T decrease");
        c->add_option("--config", opt_cfg_path, "OptimizeConfig JSON (flags override)");
        c->add_option("--out", opt_out, "output file, '-' for stdout");
    };
    auto* opt_single = opt->add_subcommand("single", "one alpha, JSON report");
    opt_single->add_option("--alpha", base_cfg.alpha, "target expectation")->required();
    add_opt_flags(opt_single);
    auto* opt_sweep = opt->add_subcommand("sweep", "alpha sweep, CSV rows");
    opt_sweep->add_option("--alphas", opt_alphas, "a:b:step or comma list")->required();
    add_opt_flags(opt_sweep);

    // ---- census ---------------------------------------------------------
    auto* cen = app.add_subcommand("census", "corner census of a plane set");
    cen->require_subcommand(1);
    std::string cen_in, cen_out = "-";
    auto* cen_run = cen->add_subcommand("run", "word-parallel census, CSV");
    cen_run->add_option("file", cen_in, "plane-set file")->required();
    cen_run->add_option("--out", cen_out, "output file, '-' for stdout");
    auto* cen_oracle = cen->add_subcommand("oracle", "serial reference census, CSV");
    cen_oracle->add_option("file", cen_in)->required();
    cen_oracle->add_option("--out", cen_out);
    auto* cen_pop = cen->add_subcommand("popular", "maximizing nonzero difference");
    cen_pop->add_option("file", cen_in)->required();

    // ---- construct ------------------------------------------------------
    auto* con = app.add_subcommand("construct", "randomized set from a kernel");
    std::string con_kernel, con_group, con_out = "-", con_dump, con_csv;
    std::uint64_t con_seed = 0, con_trials = 0;
    bool con_renorm = false;
    con->add_option("--kernel", con_kernel, "kernel JSON file")->required();
    con->add_option("--group", con_group, "group descriptor, e.g. 'cyclic 512'")->required();
    con->add_option("--seed", con_seed, "master seed");
    con->add_option("--out", con_out, "report JSON output");
    con->add_option("--dump-set", con_dump, "also write the sampled plane set");
    con->add_option("--csv", con_csv, "also write (d, |S_d|/N^2) CSV");
    con->add_option("--corner-trials", con_trials, "extra Monte-Carlo corner probability trials");
    con->add_flag("--renormalize", con_renorm);

    // ---- regularity -----------------------------------------------------
    auto* reg = app.add_subcommand("regularity", "energy-increment boxing over F_2^n");
    std::string reg_in, reg_out, reg_traj, reg_audit, reg_boxk;
    double reg_eps = 0.3;
    std::uint64_t reg_seed = 0;
    RegularityCaps caps;
    bool reg_count = false;
    reg->add_option("file", reg_in, "plane-set file over vector 2 n")->required();
    reg->add_option("--epsilon", reg_eps, "regularity parameter");
    reg->add_option("--seed", reg_seed, "seed for sampled audits");
    reg->add_option("--codim-cap", caps.codim_cap, "cap on codim(W)");
    reg->add_option("--m-cap", caps.m_cap, "cap on cells per partition");
    reg->add_option("--max-n", caps.max_n, "cap on the ambient dimension");
    reg->add_option("--out", reg_out, "boxing JSON output");
    reg->add_option("--trajectory", reg_traj, "energy trajectory CSV output");
    reg->add_option("--audit", reg_audit, "audit report JSON output");
    reg->add_option("--box-kernels", reg_boxk, "box kernels of audit-passing boxes, JSON");
    reg->add_flag("--count-corners", reg_count, "include the corner count with d in W");

    CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#endif

    ManifestScope ms;
    ms.save_path = manifest_path;
    ms.threads = threads;

    // ---- dispatch ---------------------------------------------------------
    if (tfunc->parsed()) {
        const std::string bytes = read_input(tf_in);
        ms.hash_input(tf_in, bytes);
        const auto in_json = parse_json(bytes);
        const bool was_piecewise = json_is_piecewise(in_json);
        DiscreteKernel k = was_piecewise ? from_piecewise(piecewise_from_json(in_json))
                                         : kernel_from_json(in_json);
        if (tf_renorm) k = renormalized(k);
        validate(k);
        if (tf_eval->parsed()) {
            ms.m.subcommand = "tfunc eval";
            ms.m.config = {{"file", tf_in}, {"renormalize", tf_renorm}};
            const bool exact = exact_eligible(k);
            const double a = expectation(k), t = t_value(k);
            const BigRat ae = exact ? expectation_exact(k) : BigRat(0);
            const BigRat te = exact ? t_value_exact(k) : BigRat(0);
            std::cout << "alpha = " << format_value(a, ae, exact)
                      << ", T = " << format_value(t, te, exact) << "\n";
        } else {
            DiscreteKernel out;
            if (tf_tensor->parsed()) {
                ms.m.subcommand = "tfunc tensor";
                ms.m.config = {{"file", tf_in}, {"n", tf_n}, {"max_cells", tf_budget}};
                out = tensor_power(k, tf_n, tf_budget);
            } else if (tf_scale->parsed()) {
                ms.m.subcommand = "tfunc scale";
                ms.m.config = {{"file", tf_in}, {"beta", tf_beta}};
                out = scale(std::move(k), tf_beta);
            } else if (tf_mix->parsed()) {
                ms.m.subcommand = "tfunc mix";
                ms.m.config = {{"file", tf_in}, {"epsilon", tf_eps}};
                out = epsilon_mix(std::move(k), tf_eps);
            } else {  // convert
                ms.m.subcommand = "tfunc convert";
                ms.m.config = {{"file", tf_in}};
                write_output(tf_out, was_piecewise
                                         ? kernel_to_json(k).dump(2) + "\n"
                                         : piecewise_to_json(to_piecewise(k)).dump(2) + "\n");
                ms.emit();
                return 0;
            }
            write_output(tf_out, kernel_to_json(out).dump(2) + "\n");
        }
        ms.emit();
        return 0;
    }

    if (opt->parsed()) {
        base_cfg.shape = parse_shape(opt_shape);
        if (!opt_cfg_path.empty()) {
            const std::string bytes = read_input(opt_cfg_path);
            ms.hash_input(opt_cfg_path, bytes);
            const auto j = parse_json(bytes);
            if (j.contains("alpha")) base_cfg.alpha = j.at("alpha").get<double>();
            if (j.contains("shape")) base_cfg.shape = j.at("shape").get<std::array<std::size_t, 3>>();
            if (j.contains("restarts")) base_cfg.restarts = j.at("restarts").get<int>();
            if (j.contains("max_iters")) base_cfg.max_iters = j.at("max_iters").get<int>();
            if (j.contains("seed")) base_cfg.seed = j.at("seed").get<std::uint64_t>();
            if (j.contains("tolerance")) base_cfg.tolerance = j.at("tolerance").get<double>();
        }
        ms.m.seed = base_cfg.seed;
        if (opt_single->parsed()) {
            ms.m.subcommand = "optimize single";
            ms.m.config = {{"alpha", base_cfg.alpha}, {"shape", base_cfg.shape},
                           {"restarts", base_cfg.restarts}, {"max_iters", base_cfg.max_iters},
                           {"seed", base_cfg.seed}, {"tolerance", base_cfg.tolerance}};
            const auto rep = minimize_t(base_cfg);
            write_output(opt_out, optimize_report_to_json(rep).dump(2) + "\n");
        } else {
            ms.m.subcommand = "optimize sweep";
            ms.m.config = {{"alphas", opt_alphas}, {"shape", base_cfg.shape},
                           {"restarts", base_cfg.restarts}, {"max_iters", base_cfg.max_iters},
                           {"seed", base_cfg.seed}};
            const auto rows = sweep(base_cfg, parse_alphas(opt_alphas));
            write_output(opt_out, sweep_to_csv(rows));
        }
        ms.emit();
        return 0;
    }

    if (cen->parsed()) {
        PlaneSet A = load_planeset(cen_in, ms);
        if (cen_run->parsed()) {
            ms.m.subcommand = "census run";
            ms.m.config = {{"file", cen_in}};
            write_output(cen_out, census_to_csv(census(A)));
        } else if (cen_oracle->parsed()) {
            ms.m.subcommand = "census oracle";
            ms.m.config = {{"file", cen_in}};
            write_output(cen_out, census_to_csv(census_oracle(A)));
        } else {
            ms.m.subcommand = "census popular";
            ms.m.config = {{"file", cen_in}};
            const auto c = census(A);
            const auto [d, count] = max_popular_difference(c);
            const double n2 = static_cast<double>(A.order()) * static_cast<double>(A.order());
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.12g", static_cast<double>(count) / n2);
            std::cout << "d = " << d << ", count = " << count << ", density = " << buf << "\n";
        }
        ms.emit();
        return 0;
    }

    if (con->parsed()) {
        DiscreteKernel k = load_kernel(con_kernel, con_renorm, ms);
        FiniteAbelianGroup g{GroupDescriptor::parse(con_group)};
        ms.m.subcommand = "construct";
        ms.m.seed = con_seed;
        ms.m.config = {{"kernel", con_kernel}, {"group", con_group}, {"seed", con_seed},
                       {"corner_trials", con_trials}};
        auto rep = run_experiment(k, g, con_seed, ms.m.input_hashes[con_kernel]);
        auto j = construction_report_to_json(rep);
        if (con_trials > 0)
            j["corner_probability"] = corner_probability_check(k, g, con_seed, con_trials);
        write_output(con_out, j.dump(2) + "\n");
        if (!con_dump.empty()) write_output(con_dump, planeset_to_text(sample_set(k, g, con_seed)));
        if (!con_csv.empty()) write_output(con_csv, census_density_csv(experiment_census(k, g, con_seed)));
        ms.emit();
        return 0;
    }

    if (reg->parsed()) {
        PlaneSet A = load_planeset(reg_in, ms);
        ms.m.subcommand = "regularity";
        ms.m.seed = reg_seed;
        ms.m.config = {{"file", reg_in}, {"epsilon", reg_eps}, {"seed", reg_seed},
                       {"codim_cap", caps.codim_cap}, {"m_cap", caps.m_cap}, {"max_n", caps.max_n}};
        const auto outcome = find_regular_boxing(A, reg_eps, caps, reg_seed);
        if (!reg_out.empty()) write_output(reg_out, boxing_to_json(outcome.boxing).dump() + "\n");
        if (!reg_traj.empty()) write_output(reg_traj, trajectory_to_csv(outcome.trajectory));
        if (!reg_audit.empty() || !reg_boxk.empty() || reg_count) {
            const auto ua = uniformity_audit(outcome.boxing, reg_eps);
            const auto qa = quasirandom_audit_all(A, outcome.boxing, reg_eps, reg_seed);
            std::vector<char> upass(outcome.boxing.box_count(), 1);
            for (const auto& w : ua.witnesses) upass[w.box] = 0;
            nlohmann::json aj = regularity_outcome_to_json(outcome);
            aj["uniformity"] = {{"threshold", ua.threshold},
                                {"failing_boxes", ua.witnesses.size()},
                                {"boxes", ua.boxes_checked}};
            aj["quasirandomness"] = {{"failing_boxes", qa.failing_boxes}, {"boxes", qa.boxes_checked}};
            nlohmann::json boxes = nlohmann::json::array();
            nlohmann::json bks = nlohmann::json::array();
            for (std::size_t b = 0; b < outcome.boxing.box_count(); ++b) {
                const bool qpass = qa.nonqr_mass[b][0] <= reg_eps && qa.nonqr_mass[b][1] <= reg_eps &&
                                   qa.nonqr_mass[b][2] <= reg_eps;
                const auto bk = box_kernel(outcome.boxing, b, A);
                boxes.push_back({{"alpha_v", bk.alpha_v},
                                 {"passes_uniformity", upass[b] != 0},
                                 {"passes_quasirandomness", qpass}});
                if (upass[b] && qpass && !reg_boxk.empty())
                    bks.push_back({{"box", b},
                                   {"alpha_v", bk.alpha_v},
                                   {"unclipped_expectation", bk.unclipped_expectation},
                                   {"clip_loss", bk.clip_loss},
                                   {"kernel", kernel_to_json(bk.kernel)}});
            }
            aj["boxes"] = std::move(boxes);
            if (reg_count) {
                const auto cw = corners_within_W(A, outcome.boxing.W);
                aj["corners_within_W"] = {{"total", cw.total}, {"degenerate", cw.degenerate}};
            }
            if (!reg_audit.empty()) write_output(reg_audit, aj.dump(2) + "\n");
            if (!reg_boxk.empty()) write_output(reg_boxk, bks.dump(2) + "\n");
        }
        if (outcome.regular) {
            std::cout << "regular boxing: codim = " << outcome.boxing.W.codim()
                      << ", m = " << outcome.boxing.m << ", steps = " << outcome.trajectory.size()
                      << "\n";
            ms.emit();
            return 0;
        }
        std::cout << "caps exhausted: " << outcome.diagnostic << "\n";
        ms.emit();
        return 2;  // diagnostic, distinct from a crash
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ResourceError& e) {
        std::cerr << "resource error: " << e.what() << "\n";
        return 2;
    } catch (const InternalError& e) {
        std::cerr << "internal invariant failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
