#include "cqrrpt/verify.hh"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <sstream>

#include "cqrrpt/analysis.hh"
#include "cqrrpt/cqrrpt.hh"
#include "cqrrpt/linalg.hh"
#include "cqrrpt/rng.hh"
#include "cqrrpt/testmat.hh"

namespace cqrrpt {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char *pattern, ...) {
    char buf[512];
    va_list args;
    va_start(args, pattern);
    std::vsnprintf(buf, sizeof(buf), pattern, args);
    va_end(args);
    return buf;
}

int64_t scaled(int64_t base, double scale) {
    return std::max<int64_t>(1, static_cast<int64_t>(std::llround(base * scale)));
}

double measure_orth_loss(const DenseMatrix &q) {
    DenseMatrix g = matmul_at_b(q, q);
    for (int64_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
    return spectral_norm(g);
}

std::vector<int64_t> random_permutation(int64_t n, uint64_t seed) {
    std::vector<int64_t> p(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) p[static_cast<size_t>(i)] = i;
    CounterRng rng(seed);
    for (int64_t i = 0; i < n - 1; ++i) {
        int64_t j = i + static_cast<int64_t>(rng.below(static_cast<uint64_t>(i),
                                                       static_cast<uint64_t>(n - i)));
        std::swap(p[static_cast<size_t>(i)], p[static_cast<size_t>(j)]);
    }
    return p;
}

// --------------------------------------------------------------------------
// Criterion 1: every full-rank factorization validates at 1e-13.
CriterionResult check_thm21(const VerifyOptions &o) {
    CriterionResult r{"thm2.1", "correctness on full-rank tall matrices", false, 0, ""};
    auto t0 = Clock::now();
    int64_t trials = scaled(20, o.trial_scale);
    double worst_recon = 0.0, worst_loss = 0.0;
    bool ok = true;
    for (int64_t i = 0; i < trials; ++i) {
        DenseMatrix m = gen_gaussian(1000, 100, mix_seed(o.seed, 1000 + i));
        SketchOperator s =
            sample_sketch(SketchFamily::gaussian, 125, 1000, 0, mix_seed(o.seed, 2000 + i));
        CqrrptConfig cfg;
        cfg.validate_output = false;
        CqrrptOutput out = cqrrpt_core(m, s, cfg);
        ValidationReport rep = validate(out.factorization, m, 1e-13);
        worst_recon = std::max(worst_recon, rep.recon_rel);
        worst_loss = std::max(worst_loss, rep.orth_loss);
        ok = ok && rep.pass && out.k == 100;
    }
    r.seconds = elapsed(t0);
    ok = ok && r.seconds < 5.0;
    r.pass = ok;
    r.detail = fmt("trials=%lld worst_recon=%.3e worst_loss=%.3e budget=1e-13 time=%.2fs<5s",
                   (long long)trials, worst_recon, worst_loss, r.seconds);
    return r;
}

// --------------------------------------------------------------------------
// Criterion 2: singular values of the preconditioned matrix invert the
// restricted singular values of the sketch.
CriterionResult check_thm22(const VerifyOptions &o) {
    CriterionResult r{"thm2.2", "spectrum map of the preconditioned matrix", false, 0, ""};
    auto t0 = Clock::now();
    int64_t trials = scaled(20, o.trial_scale);
    double worst = 0.0;
    for (int64_t i = 0; i < trials; ++i) {
        DenseMatrix m = gen_gaussian(500, 40, mix_seed(o.seed, 3000 + i));
        SketchOperator s =
            sample_sketch(SketchFamily::gaussian, 50, 500, 0, mix_seed(o.seed, 4000 + i));
        DenseMatrix msk = apply(s, m);
        PivotedQR sk = qrcp_maxnorm(msk, -1.0, false);
        if (sk.rank != 40) {
            worst = 1.0;
            break;
        }
        DenseMatrix m_pre = trsm_right(m.select_columns(sk.pivots), sk.r.leading_block(40));
        std::vector<double> s_pre = svd_values(m_pre);
        std::vector<double> s_su = svd_values(apply(s, numerical_range_basis(m)));
        for (int j = 0; j < 40; ++j)
            worst = std::max(worst, std::fabs(s_pre[j] * s_su[39 - j] - 1.0));
    }
    r.seconds = elapsed(t0);
    r.pass = worst <= 1e-9;
    r.detail = fmt("trials=%lld max_dev=%.3e budget=1e-9", (long long)trials, worst);
    return r;
}

// --------------------------------------------------------------------------
// Criterion 3: small measured distortion implies a well-conditioned
// preconditioned block. Low-rank instances keep the premise non-vacuous at
// gamma = 2.
CriterionResult check_cor31(const VerifyOptions &o) {
    CriterionResult r{"cor3.1", "preconditioner conditioning under small distortion", false, 0, ""};
    auto t0 = Clock::now();
    int64_t trials = scaled(100, o.trial_scale);
    int64_t active = 0, holds = 0;
    double worst_cond = 0.0;
    for (int64_t i = 0; i < trials; ++i) {
        int64_t rank = 2 + (i % 4);
        DenseMatrix m = gen_exact_rank(400, 48, rank, mix_seed(o.seed, 5000 + i));
        SketchOperator s =
            sample_sketch(SketchFamily::gaussian, 96, 400, 0, mix_seed(o.seed, 6000 + i));
        SubspaceDiagnostics d = diagnostics(s, m);
        if (d.distortion > 0.25) continue;
        ++active;
        CqrrptConfig cfg;
        cfg.validate_output = false;
        CqrrptOutput out = cqrrpt_core(m, s, cfg);
        DenseMatrix msk = apply(s, m);
        PivotedQR sk = qrcp_maxnorm(msk, -1.0, false);
        DenseMatrix m_pre = trsm_right(
            m.select_columns(std::span<const int64_t>(sk.pivots.data(), out.k)),
            sk.r.leading_block(out.k));
        std::vector<double> sv = svd_values(m_pre);
        double cond = sv.front() / sv.back();
        worst_cond = std::max(worst_cond, cond);
        if (cond <= 1.8) ++holds;
    }
    r.seconds = elapsed(t0);
    r.pass = active > 0 && holds == active;
    r.detail = fmt("trials=%lld active=%lld holds=%lld worst_cond=%.3f budget=1.8",
                   (long long)trials, (long long)active, (long long)holds, worst_cond);
    return r;
}

// --------------------------------------------------------------------------
// Criterion 4: plain CholeskyQR breaks on an ill-conditioned matrix that the
// preconditioned pipeline handles at roundoff.
CriterionResult check_stability(const VerifyOptions &o) {
    CriterionResult r{"stability", "stability split against plain CholeskyQR", false, 0, ""};
    auto t0 = Clock::now();
    DenseMatrix m =
        gen_spectral(4096, 256, SpectrumSpec::polynomial_decay(1e10), mix_seed(o.seed, 7000));
    CholeskyQrResult plain = cholesky_qr(m);
    double plain_loss = plain.ok() ? measure_orth_loss(plain.q) : -1.0;
    bool plain_bad = !plain.ok() || plain_loss >= 1e-3;

    CqrrptConfig cfg;
    cfg.seed = mix_seed(o.seed, 7001);
    cfg.validate_output = false;
    CqrrptOutput out = cqrrpt(m, cfg);
    ValidationReport rep = validate(out.factorization, m, 1e-12);
    r.seconds = elapsed(t0);
    r.pass = plain_bad && rep.recon_rel <= 1e-12 && rep.orth_loss <= 1e-12 && r.seconds < 10.0;
    r.detail = fmt("plain=%s cqrrpt_loss=%.3e cqrrpt_recon=%.3e budget=1e-12 time=%.2fs<10s",
                   plain.ok() ? fmt("loss=%.3e", plain_loss).c_str() : "cholesky-failure",
                   rep.orth_loss, rep.recon_rel, r.seconds);
    return r;
}

// --------------------------------------------------------------------------
// Criterion 5: the two-stage rank selection finds an embedded exact rank.
CriterionResult check_rank(const VerifyOptions &o) {
    CriterionResult r{"rank", "exact-rank detection", false, 0, ""};
    auto t0 = Clock::now();
    int64_t trials = scaled(20, o.trial_scale);
    bool ok = true;
    double worst_recon = 0.0;
    for (int64_t i = 0; i < trials; ++i) {
        DenseMatrix m = gen_exact_rank(512, 64, 17, mix_seed(o.seed, 8000 + i));
        CqrrptConfig cfg;
        cfg.seed = mix_seed(o.seed, 8100 + i);
        cfg.validate_output = false;
        CqrrptOutput out = cqrrpt(m, cfg);
        ValidationReport rep = validate(out.factorization, m, 1.0);
        worst_recon = std::max(worst_recon, rep.recon_rel);
        ok = ok && out.k == 17 && rep.recon_rel <= 1e-12;
    }
    r.seconds = elapsed(t0);
    r.pass = ok;
    r.detail = fmt("trials=%lld k=17-required worst_recon=%.3e budget=1e-12", (long long)trials,
                   worst_recon);
    return r;
}

// --------------------------------------------------------------------------
// Pivot-quality machinery shared by criteria 6 and 7.
struct QualityTrial {
    bool trailing_in_band = true; // ratio within [0.5, 2] for every k < n
    bool diag_within_4x = true;   // pointwise over the common prefix
    bool any_exit = false;
};

QualityTrial quality_trial(const DenseMatrix &m, const PivotedQR &ref,
                           std::span<const double> sigma, double gamma, int64_t nnz,
                           uint64_t sketch_seed, bool check_diag) {
    CqrrptConfig cfg;
    cfg.gamma = gamma;
    cfg.nnz_per_col = nnz;
    cfg.family = SketchFamily::saso;
    cfg.seed = sketch_seed;
    cfg.validate_output = false;
    CqrrptOutput out = cqrrpt(m, cfg);
    PivotQualityCurves pq = pivot_quality(m, ref, out.factorization, sigma);
    QualityTrial t;
    for (size_t k = 0; k + 1 < pq.trailing_ratio.size(); ++k) {
        double ratio = pq.trailing_ratio[k];
        if (!(ratio >= 0.5 && ratio <= 2.0)) {
            t.trailing_in_band = false;
            t.any_exit = true;
        }
    }
    if (check_diag) {
        if (pq.diag_ratio_ref.size() != pq.diag_ratio_test.size()) t.diag_within_4x = false;
        size_t kk = std::min(pq.diag_ratio_ref.size(), pq.diag_ratio_test.size());
        for (size_t i = 0; i < kk; ++i) {
            double a = pq.diag_ratio_ref[i], b = pq.diag_ratio_test[i];
            if ((a > b ? a / b : b / a) > 4.0) t.diag_within_4x = false;
        }
    }
    return t;
}

CriterionResult check_pivots_low(const VerifyOptions &o) {
    CriterionResult r{"pivots-low", "pivot quality on low-coherence matrices", false, 0, ""};
    auto t0 = Clock::now();
    int64_t trials = scaled(20, o.trial_scale);
    int64_t need = (trials * 18 + 19) / 20; // >= 18/20, scaled
    int64_t pass_st = 0, pass_pd = 0;
    for (int fam = 0; fam < 2; ++fam) {
        SpectrumSpec spec =
            fam == 0 ? SpectrumSpec::staircase() : SpectrumSpec::polynomial_decay(1e10);
        std::vector<double> sigma = spectrum_values(spec, 256);
        for (int64_t i = 0; i < trials; ++i) {
            DenseMatrix m = gen_spectral(8192, 256, spec, mix_seed(o.seed, 9000 + fam * 100 + i));
            PivotedQR ref = qrcp_maxnorm(m, -1.0, false);
            QualityTrial t = quality_trial(m, ref, sigma, 1.0, 1,
                                           mix_seed(o.seed, 9500 + fam * 100 + i), true);
            if (t.trailing_in_band && t.diag_within_4x) ++(fam == 0 ? pass_st : pass_pd);
        }
    }
    r.seconds = elapsed(t0);
    r.pass = pass_st >= need && pass_pd >= need;
    r.detail = fmt("staircase=%lld/%lld polydecay=%lld/%lld need=%lld band=[0.5,2] diag=4x",
                   (long long)pass_st, (long long)trials, (long long)pass_pd, (long long)trials,
                   (long long)need);
    return r;
}

CriterionResult check_pivots_high(const VerifyOptions &o) {
    CriterionResult r{"pivots-high", "pivot quality on the high-coherence construction", false, 0,
                      ""};
    auto t0 = Clock::now();
    int64_t trials = scaled(20, o.trial_scale);
    int64_t need_good = (trials * 18 + 19) / 20;
    int64_t need_bad = (trials + 1) / 2; // >= 10/20, scaled
    int64_t good = 0, exits = 0;
    for (int64_t i = 0; i < trials; ++i) {
        DenseMatrix m = gen_high_coherence(8192, 256, 1e10, mix_seed(o.seed, 10000 + i));
        PivotedQR ref = qrcp_maxnorm(m, -1.0, false);
        std::span<const double> no_sigma;
        QualityTrial conservative =
            quality_trial(m, ref, no_sigma, 3.0, 4, mix_seed(o.seed, 10100 + i), false);
        if (conservative.trailing_in_band) ++good;
        QualityTrial aggressive =
            quality_trial(m, ref, no_sigma, 1.0, 1, mix_seed(o.seed, 10200 + i), false);
        if (aggressive.any_exit) ++exits;
    }
    r.seconds = elapsed(t0);
    r.pass = good >= need_good && exits >= need_bad;
    r.detail = fmt("gamma3_nnz4_ok=%lld/%lld (need %lld) gamma1_nnz1_exits=%lld/%lld (need %lld)",
                   (long long)good, (long long)trials, (long long)need_good, (long long)exits,
                   (long long)trials, (long long)need_bad);
    return r;
}

// --------------------------------------------------------------------------
// Criterion 8: sketched rank-revealing inheritance bounds.
CriterionResult check_rrqr_inherit(const VerifyOptions &o) {
    CriterionResult r{"rrqr-inherit", "sketched rank-revealing inheritance", false, 0, ""};
    auto t0 = Clock::now();
    int64_t trials = scaled(200, o.trial_scale);
    double worst = -1e300;
    int64_t done = 0;
    for (int64_t i = 0; i < trials; ++i) {
        DenseMatrix m = gen_exact_rank(12, 8, 5, mix_seed(o.seed, 11000 + i));
        SketchOperator s =
            sample_sketch(SketchFamily::gaussian, 8, 12, 0, mix_seed(o.seed, 12000 + i));
        std::vector<int64_t> pivots = random_permutation(8, mix_seed(o.seed, 13000 + i));
        DenseMatrix sd = densify(s);
        SubspaceDiagnostics d = diagnostics(sd, m);
        if (d.effective_distortion >= 1.0) continue; // rank lost: outside the premise
        InheritanceCheck chk = inheritance_check(m, sd, pivots);
        worst = std::max(worst, chk.max_violation());
        ++done;
    }
    r.seconds = elapsed(t0);
    r.pass = done > 0 && worst <= 1e-9;
    r.detail = fmt("instances=%lld/%lld worst_violation=%.3e budget=1e-9", (long long)done,
                   (long long)trials, worst);
    return r;
}

// --------------------------------------------------------------------------
// Criterion 9: max-norm pivot quasi-optimality under sketching.
CriterionResult check_maxnorm(const VerifyOptions &o) {
    CriterionResult r{"maxnorm", "max-norm pivot similarity bounds", false, 0, ""};
    auto t0 = Clock::now();
    int64_t trials = scaled(100, o.trial_scale);
    double worst_sigma = -1e300, worst_eff = -1e300;
    for (int64_t i = 0; i < trials; ++i) {
        DenseMatrix m = gen_gaussian(50, 20, mix_seed(o.seed, 14000 + i));
        SketchOperator s =
            sample_sketch(SketchFamily::gaussian, 22, 50, 0, mix_seed(o.seed, 15000 + i));
        DenseMatrix sd = densify(s);
        for (int64_t ell = 0; ell <= 10; ++ell) {
            SimilarityCheck chk = maxnorm_similarity_check(m, sd, ell);
            worst_sigma = std::max(worst_sigma, chk.violation_sigma());
            worst_eff = std::max(worst_eff, chk.violation_effdist());
        }
    }
    r.seconds = elapsed(t0);
    r.pass = worst_sigma <= 1e-12 && worst_eff <= 1e-12;
    r.detail = fmt("instances=%lld ell=0..10 worst_sigma=%.3e worst_effdist=%.3e budget=1e-12",
                   (long long)trials, worst_sigma, worst_eff);
    return r;
}

// --------------------------------------------------------------------------
// Criterion 10: Householder and Gram-Schmidt pivot sequences coincide.
CriterionResult check_pivot_equiv(const VerifyOptions &o) {
    CriterionResult r{"pivot-equiv", "Householder vs Gram-Schmidt pivot equivalence", false, 0,
                      ""};
    auto t0 = Clock::now();
    int64_t trials = scaled(100, o.trial_scale);
    int64_t agree = 0;
    for (int64_t i = 0; i < trials; ++i) {
        DenseMatrix m = gen_gaussian(100, 30, mix_seed(o.seed, 16000 + i));
        if (qrcp_maxnorm(m).pivots == qrcp_gram_schmidt(m).pivots) ++agree;
    }
    r.seconds = elapsed(t0);
    r.pass = agree == trials;
    r.detail = fmt("agree=%lld/%lld", (long long)agree, (long long)trials);
    return r;
}

// --------------------------------------------------------------------------
// Criterion 11: flop model re-summation and leading coefficient.
CriterionResult check_flops(const VerifyOptions &o) {
    CriterionResult r{"flops", "arithmetic-cost model", false, 0, ""};
    auto t0 = Clock::now();
    CounterRng rng(mix_seed(o.seed, 17000));
    bool exact = true;
    for (int i = 0; i < 10; ++i) {
        int64_t m = 100 + static_cast<int64_t>(rng.below(4 * i, 1000000));
        int64_t n = 2 + static_cast<int64_t>(rng.below(4 * i + 1, 1000));
        int64_t d = n + static_cast<int64_t>(rng.below(4 * i + 2, n));
        int64_t k = 1 + static_cast<int64_t>(rng.below(4 * i + 3, static_cast<uint64_t>(n)));
        if (m < n) std::swap(m, n);
        k = std::min(k, std::min(d, n));
        using I = __int128;
        I mm = m, nn = n, kk = k, dd = d;
        I qrcp6 = 24 * dd * nn * kk - 12 * kk * kk * (dd + nn) + 8 * kk * kk * kk;
        I trsm6 = 6 * mm * kk * kk;
        I cholqr6 = 6 * mm * kk * (kk + 1) + 2 * kk * kk * kk + 3 * kk * kk + kk + 6 * mm * kk * kk;
        double oracle = static_cast<double>(qrcp6 + trsm6 + cholqr6) / 6.0 + 3.25;
        if (flop_model(m, n, k, d, 3.25) != oracle) exact = false;
    }
    double ratio = flop_model(1000000, 1000, 1000, 1250, 0.0) / (1e6 * 1e6);
    r.seconds = elapsed(t0);
    r.pass = exact && std::fabs(ratio - 3.0) <= 0.01 * 3.0;
    r.detail = fmt("resummation=%s leading_ratio=%.6f budget=3+-1%%", exact ? "exact" : "MISMATCH",
                   ratio);
    return r;
}

// --------------------------------------------------------------------------
// Criterion 12: structural sketch checks.
CriterionResult check_sketch_struct(const VerifyOptions &o) {
    CriterionResult r{"sketch-struct", "structural sketching-operator checks", false, 0, ""};
    auto t0 = Clock::now();
    bool ok = true;
    std::ostringstream why;

    // SASO column structure, exact.
    SketchOperator saso = sample_sketch(SketchFamily::saso, 16, 200, 4, mix_seed(o.seed, 18000));
    DenseMatrix sd = densify(saso);
    for (int64_t j = 0; j < 200 && ok; ++j) {
        int nnz = 0;
        for (int64_t i = 0; i < 16; ++i) {
            double v = sd(i, j);
            if (v != 0.0) {
                ++nnz;
                if (std::fabs(v) != 0.25) ok = false; // 1/sqrt(16)
            }
        }
        if (nnz != 4) ok = false;
    }
    if (!ok) why << "saso-structure ";

    // SRFT row Gram identity.
    SketchOperator srft = sample_sketch(SketchFamily::srft, 16, 64, 0, mix_seed(o.seed, 18001));
    DenseMatrix srft_d = densify(srft);
    DenseMatrix sst = matmul(srft_d, transpose(srft_d));
    for (int64_t i = 0; i < 16; ++i) sst(i, i) -= 64.0 / 16.0;
    double srft_dev = max_abs(sst);
    if (srft_dev > 1e-12) {
        ok = false;
        why << "srft-gram ";
    }

    // Leverage scores sum to n.
    DenseMatrix m = gen_gaussian(300, 24, mix_seed(o.seed, 18002));
    std::vector<double> scores = leverage_scores(m);
    double sum = 0.0;
    for (double v : scores) sum += v;
    if (std::fabs(sum - 24.0) > 1e-10) {
        ok = false;
        why << "leverage-sum ";
    }

    // Determinism on every family: bitwise-equal operator and output.
    DenseMatrix probe = gen_gaussian(64, 6, mix_seed(o.seed, 18003));
    for (auto fam : {SketchFamily::gaussian, SketchFamily::saso, SketchFamily::srft}) {
        SketchOperator a = sample_sketch(fam, 16, 64, 3, mix_seed(o.seed, 18004));
        SketchOperator b = sample_sketch(fam, 16, 64, 3, mix_seed(o.seed, 18004));
        if (!(densify(a) == densify(b)) || !(apply(a, probe) == apply(b, probe))) {
            ok = false;
            why << "determinism-" << family_name(fam) << " ";
        }
    }

    r.seconds = elapsed(t0);
    r.pass = ok;
    r.detail = ok ? fmt("saso-exact srft_dev=%.2e leverage_sum_dev=%.2e determinism-ok", srft_dev,
                        std::fabs(sum - 24.0))
                  : ("failed: " + why.str());
    return r;
}

} // namespace

std::vector<CriterionResult> run_verification(const VerifyOptions &opts) {
    using Check = CriterionResult (*)(const VerifyOptions &);
    std::pair<const char *, Check> checks[] = {
        {"thm2.1", check_thm21},       {"thm2.2", check_thm22},
        {"cor3.1", check_cor31},       {"stability", check_stability},
        {"rank", check_rank},          {"pivots-low", check_pivots_low},
        {"pivots-high", check_pivots_high}, {"rrqr-inherit", check_rrqr_inherit},
        {"maxnorm", check_maxnorm},    {"pivot-equiv", check_pivot_equiv},
        {"flops", check_flops},        {"sketch-struct", check_sketch_struct},
    };
    std::vector<CriterionResult> results;
    for (auto &[id, fn] : checks) {
        if (!opts.only.empty() && opts.only != id) continue;
        if (!opts.quiet) {
            std::printf("[ run  ] %s\n", id);
            std::fflush(stdout);
        }
        results.push_back(fn(opts));
    }
    return results;
}

int report_verification(const std::vector<CriterionResult> &results) {
    int failures = 0;
    double total = 0.0;
    for (const auto &r : results) {
        std::printf("[%s] %-13s %-48s (%6.2fs) %s\n", r.pass ? " PASS " : "*FAIL*",
                    r.id.c_str(), r.name.c_str(), r.seconds, r.detail.c_str());
        failures += r.pass ? 0 : 1;
        total += r.seconds;
    }
    std::printf("%d/%zu checks passed in %.1fs\n", static_cast<int>(results.size()) - failures,
                results.size(), total);
    return failures;
}

} // namespace cqrrpt
