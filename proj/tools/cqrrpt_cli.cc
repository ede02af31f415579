// Experiment driver: batch pivot-quality studies, phase profiling, the
// verification suite, test-matrix generation, and Matrix Market
// factorization.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"

#include "cqrrpt/analysis.hh"
#include "cqrrpt/cqrrpt.hh"
#include "cqrrpt/linalg.hh"
#include "cqrrpt/matrix_market.hh"
#include "cqrrpt/testmat.hh"
#include "cqrrpt/verify.hh"

namespace cq = cqrrpt;
using cq::DenseMatrix;

namespace {

struct MatrixArgs {
    std::string kind = "gaussian";
    int64_t m = 1000;
    int64_t n = 100;
    double cond = 1e10;
    double scale = 1e10;
    int64_t rank = 10;
    double theta = 0.285;
};

void add_matrix_options(CLI::App *cmd, MatrixArgs &args) {
    cmd->add_option("--matrix", args.kind,
                    "matrix family: staircase, polynomial-decay, high-coherence, gaussian, "
                    "exact-rank, kahan")
        ->default_val(args.kind);
    cmd->add_option("--m", args.m, "rows")->default_val(args.m);
    cmd->add_option("--n", args.n, "columns")->default_val(args.n);
    cmd->add_option("--cond", args.cond, "condition target for polynomial-decay");
    cmd->add_option("--scale", args.scale, "row scale for high-coherence");
    cmd->add_option("--rank", args.rank, "embedded rank for exact-rank");
    cmd->add_option("--theta", args.theta, "angle for kahan");
}

DenseMatrix build_matrix(const MatrixArgs &a, uint64_t seed) {
    if (a.kind == "staircase")
        return cq::gen_spectral(a.m, a.n, cq::SpectrumSpec::staircase(), seed);
    if (a.kind == "polynomial-decay")
        return cq::gen_spectral(a.m, a.n, cq::SpectrumSpec::polynomial_decay(a.cond), seed);
    if (a.kind == "high-coherence") return cq::gen_high_coherence(a.m, a.n, a.scale, seed);
    if (a.kind == "gaussian") return cq::gen_gaussian(a.m, a.n, seed);
    if (a.kind == "exact-rank") return cq::gen_exact_rank(a.m, a.n, a.rank, seed);
    if (a.kind == "kahan") return cq::gen_kahan(a.n, a.theta);
    throw CLI::ValidationError("--matrix", "unknown matrix family: " + a.kind);
}

// Reference spectrum when the construction prescribes it; empty otherwise.
std::vector<double> known_spectrum(const MatrixArgs &a) {
    if (a.kind == "staircase") return cq::spectrum_values(cq::SpectrumSpec::staircase(), a.n);
    if (a.kind == "polynomial-decay")
        return cq::spectrum_values(cq::SpectrumSpec::polynomial_decay(a.cond), a.n);
    return {};
}

cq::SketchFamily parse_family(const std::string &name) {
    if (name == "gaussian") return cq::SketchFamily::gaussian;
    if (name == "saso") return cq::SketchFamily::saso;
    if (name == "srft") return cq::SketchFamily::srft;
    throw CLI::ValidationError("--family", "unknown sketch family: " + name);
}

struct RecordWriter {
    std::ofstream file;
    std::ostream *os = &std::cout;
    explicit RecordWriter(const std::string &path) {
        if (!path.empty()) {
            file.open(path);
            if (!file) throw std::runtime_error("cannot open output file: " + path);
            os = &file;
        }
        (*os) << "experiment,matrix,family,gamma,nnz,seed,metric,k,value\n";
    }
    void row(const std::string &experiment, const std::string &matrix, const std::string &family,
             double gamma, int64_t nnz, uint64_t seed, const std::string &metric, int64_t k,
             double value) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", value);
        (*os) << experiment << ',' << matrix << ',' << family << ',' << gamma << ',' << nnz << ','
              << seed << ',' << metric << ',' << k << ',' << buf << '\n';
    }
};

int run_pivot_quality(const MatrixArgs &margs, const std::string &family_name, double gamma,
                      int64_t nnz, uint64_t seed, const std::string &out_path) {
    DenseMatrix m = build_matrix(margs, seed);
    cq::PivotedQR ref = cq::qrcp_maxnorm(m, -1.0, /*want_q=*/false);

    cq::CqrrptConfig cfg;
    cfg.gamma = gamma;
    cfg.nnz_per_col = nnz;
    cfg.family = parse_family(family_name);
    cfg.seed = seed;
    cfg.validate_output = false;
    cq::CqrrptOutput out = cq::cqrrpt(m, cfg);

    std::vector<double> sigma = known_spectrum(margs);
    if (sigma.empty()) sigma = cq::svd_values(m);
    cq::PivotQualityCurves pq =
        cq::pivot_quality(m, ref, out.factorization, std::span<const double>(sigma));

    RecordWriter w(out_path);
    for (size_t i = 0; i < pq.trailing_ratio.size(); ++i)
        w.row("pivot-quality", margs.kind, family_name, gamma, nnz, seed, "trailing_ratio",
              static_cast<int64_t>(i + 1), pq.trailing_ratio[i]);
    for (size_t i = 0; i < pq.diag_ratio_ref.size(); ++i)
        w.row("pivot-quality", margs.kind, family_name, gamma, nnz, seed, "diag_ratio_ref",
              static_cast<int64_t>(i + 1), pq.diag_ratio_ref[i]);
    for (size_t i = 0; i < pq.diag_ratio_test.size(); ++i)
        w.row("pivot-quality", margs.kind, family_name, gamma, nnz, seed, "diag_ratio_cqrrpt",
              static_cast<int64_t>(i + 1), pq.diag_ratio_test[i]);
    std::fprintf(stderr, "pivot-quality: k=%lld of n=%lld, rows written for %lld + %lld + %lld\n",
                 (long long)out.k, (long long)margs.n, (long long)pq.trailing_ratio.size(),
                 (long long)pq.diag_ratio_ref.size(), (long long)pq.diag_ratio_test.size());
    return 0;
}

int run_profile(const MatrixArgs &margs, const std::string &family_name, double gamma, int64_t nnz,
                uint64_t seed, int64_t runs, const std::string &out_path) {
    DenseMatrix m = build_matrix(margs, seed);
    cq::CqrrptConfig cfg;
    cfg.gamma = gamma;
    cfg.nnz_per_col = nnz;
    cfg.family = parse_family(family_name);
    cfg.seed = seed;
    cfg.validate_output = false;

    cq::PhaseTimings best;
    best.total = 1e300;
    cq::CqrrptOutput out;
    for (int64_t r = 0; r < runs; ++r) {
        out = cq::cqrrpt(m, cfg);
        if (out.diagnostics.timings.total < best.total) best = out.diagnostics.timings;
    }
    double phases = best.sketch + best.qrcp + best.rank_select + best.precondition +
                    best.cholesky_qr + best.undo;
    std::printf("profile: %s %lldx%lld, %s gamma=%g nnz=%lld, best of %lld runs\n",
                margs.kind.c_str(), (long long)margs.m, (long long)margs.n, family_name.c_str(),
                gamma, (long long)nnz, (long long)runs);
    auto line = [&](const char *name, double t) {
        std::printf("  %-12s %10.6fs  %5.1f%%\n", name, t, best.total > 0 ? 100.0 * t / best.total : 0.0);
    };
    line("sketch", best.sketch);
    line("qrcp", best.qrcp);
    line("rank-select", best.rank_select);
    line("precondition", best.precondition);
    line("cholesky-qr", best.cholesky_qr);
    line("undo", best.undo);
    std::printf("  %-12s %10.6fs  (phases cover %.1f%%)\n", "total", best.total,
                best.total > 0 ? 100.0 * phases / best.total : 0.0);
    std::printf("  detected rank k=%lld, flop model %.4e\n", (long long)out.k,
                out.diagnostics.flop_estimate);

    if (!out_path.empty()) {
        RecordWriter w(out_path);
        auto emit = [&](const std::string &metric, double v) {
            w.row("profile", margs.kind, family_name, gamma, nnz, seed, metric, out.k, v);
        };
        emit("time_sketch", best.sketch);
        emit("time_qrcp", best.qrcp);
        emit("time_rank_select", best.rank_select);
        emit("time_precondition", best.precondition);
        emit("time_cholesky_qr", best.cholesky_qr);
        emit("time_undo", best.undo);
        emit("time_total", best.total);
        emit("flop_model", out.diagnostics.flop_estimate);
    }
    return 0;
}

int run_factor(const std::string &in_path, const std::string &prefix,
               const std::string &family_name, double gamma, int64_t nnz, uint64_t seed) {
    DenseMatrix m = cq::read_matrix_market(in_path);
    cq::CqrrptConfig cfg;
    cfg.gamma = gamma;
    cfg.nnz_per_col = nnz;
    cfg.family = parse_family(family_name);
    cfg.seed = seed;
    cq::CqrrptOutput out = cq::cqrrpt(m, cfg);

    cq::write_matrix_market(prefix + "_Q.mtx", out.factorization.q);
    cq::write_matrix_market(prefix + "_R.mtx", out.factorization.r);
    std::ofstream jf(prefix + "_J.txt");
    for (int64_t p : out.factorization.pivots) jf << p + 1 << "\n"; // 1-based pivot list

    std::printf("factor: %lldx%lld -> k=%lld (k0=%lld), cond(M_pre) est %.3e, trunc ratio %.3e\n",
                (long long)m.rows(), (long long)m.cols(), (long long)out.k, (long long)out.k0,
                out.diagnostics.cond_m_pre, out.diagnostics.truncation_ratio);
    if (out.diagnostics.validation) {
        const auto &v = *out.diagnostics.validation;
        std::printf("factor: validation %s (orth %.3e, recon %.3e)\n", v.pass ? "pass" : "FAIL",
                    v.orth_loss, v.recon_rel);
        return v.pass ? 0 : 1;
    }
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"randomized pivoted QR for tall matrices: experiments and verification"};
    app.require_subcommand(1);

    uint64_t seed = 0;
    app.add_option("--seed", seed, "base seed for all randomness")->default_val(0);
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (0 = runtime default, 1 = serial)");

    MatrixArgs margs;
    std::string family = "saso";
    double gamma = 1.25;
    int64_t nnz = 4;
    std::string out_path;

    auto *pq = app.add_subcommand("pivot-quality",
                                  "compare trailing-norm and diagonal curves of the reference "
                                  "pivoted factorization against the sketched one");
    add_matrix_options(pq, margs);
    pq->add_option("--family", family)->default_val(family);
    pq->add_option("--gamma", gamma)->default_val(gamma);
    pq->add_option("--nnz", nnz)->default_val(nnz);
    pq->add_option("--out", out_path, "CSV output path (default stdout)");

    int64_t runs = 5;
    auto *prof = app.add_subcommand("profile", "per-phase timings (best of --runs) and flop model");
    add_matrix_options(prof, margs);
    prof->add_option("--family", family)->default_val(family);
    prof->add_option("--gamma", gamma)->default_val(gamma);
    prof->add_option("--nnz", nnz)->default_val(nnz);
    prof->add_option("--runs", runs)->default_val(runs);
    prof->add_option("--out", out_path, "CSV output path for the timing rows");

    std::string only;
    double trials_scale_base = 20.0;
    double trials = 20.0;
    auto *ver = app.add_subcommand("verify", "run the acceptance checks");
    ver->add_option("--only", only, "run a single check by id");
    ver->add_option("--trials", trials,
                    "base trial count; 20 reproduces the reference configuration")
        ->default_val(trials);

    std::string gen_out = "matrix.mtx";
    std::string gen_format = "array";
    auto *gen = app.add_subcommand("gen", "write a test matrix in Matrix Market format");
    add_matrix_options(gen, margs);
    gen->add_option("--out", gen_out)->default_val(gen_out);
    gen->add_option("--format", gen_format, "array or coordinate")->default_val(gen_format);

    std::string in_path, prefix = "factor";
    auto *fac = app.add_subcommand("factor",
                                   "read a Matrix Market file, factorize, write Q/R as Matrix "
                                   "Market plus a 1-based pivot list");
    fac->add_option("--in", in_path)->required();
    fac->add_option("--out-prefix", prefix)->default_val(prefix);
    fac->add_option("--family", family)->default_val(family);
    fac->add_option("--gamma", gamma)->default_val(gamma);
    fac->add_option("--nnz", nnz)->default_val(nnz);

    CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#endif

    try {
        if (pq->parsed()) return run_pivot_quality(margs, family, gamma, nnz, seed, out_path);
        if (prof->parsed()) return run_profile(margs, family, gamma, nnz, seed, runs, out_path);
        if (ver->parsed()) {
            cq::VerifyOptions opts;
            opts.seed = seed;
            opts.only = only;
            opts.trial_scale = trials / trials_scale_base;
            std::vector<cq::CriterionResult> results = cq::run_verification(opts);
            if (results.empty()) {
                std::fprintf(stderr, "verify: no check named '%s'\n", only.c_str());
                return 1;
            }
            return cq::report_verification(results) == 0 ? 0 : 1;
        }
        if (gen->parsed()) {
            DenseMatrix m = build_matrix(margs, seed);
            cq::write_matrix_market(gen_out, m,
                                    gen_format == "coordinate" ? cq::MatrixMarketFormat::coordinate
                                                               : cq::MatrixMarketFormat::array);
            std::printf("gen: wrote %lldx%lld %s matrix to %s\n", (long long)m.rows(),
                        (long long)m.cols(), margs.kind.c_str(), gen_out.c_str());
            return 0;
        }
        if (fac->parsed()) return run_factor(in_path, prefix, family, gamma, nnz, seed);
    } catch (const std::exception &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
