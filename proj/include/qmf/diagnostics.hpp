#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "qmf/accum.hpp"
#include "qmf/meanfield.hpp"
#include "qmf/models.hpp"
#include "qmf/parallel.hpp"
#include "qmf/tensor_ops.hpp"

namespace qmf {

// ---------------------------------------------------------------------------
// deviation between a joint state and a mean-field reference
// ---------------------------------------------------------------------------

// alpha = 1 - tr(gamma rho^j). Computed both through the marginal and
// through the embedded reference; the two routes must agree.
inline double alpha_deviation(const NState& rhoN, const DensityMatrix& gamma, int j) {
    if (gamma.dim() != rhoN.local_dim) {
        throw DimensionMismatch("alpha_deviation: gamma dim != local dim");
    }
    const TensorLayout lay(rhoN.n_particles, rhoN.local_dim);
    const ComplexMatrix marginal = partial_trace_raw(rhoN.inner.matrix(), lay, j);
    const double via_marginal = 1.0 - (gamma.matrix() * marginal).trace().real();

    ComplexMatrix embedded;
    apply_local_left(gamma.matrix(), j, lay, rhoN.inner.matrix(), embedded);
    const double via_embedding = 1.0 - embedded.trace().real();

    if (std::fabs(via_marginal - via_embedding) > 1e-9) {
        throw Error("AlphaRouteMismatch",
                    "partial-trace and embedded routes differ by " +
                        std::to_string(std::fabs(via_marginal - via_embedding)));
    }
    return via_marginal;
}

// ---------------------------------------------------------------------------
// trace inequality check
// ---------------------------------------------------------------------------

struct Lemma1Result {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

// lhs = |tr(LALB) - 1/2 tr(B(LA + AL)) tr(BL + AL) + tr(BA) tr(BL) tr(AL)|
// rhs = 18 ||L||^2 tr((I - A) B), spectral norm.
inline Lemma1Result lemma1_check(const DensityMatrix& a, const DensityMatrix& b,
                                 const ComplexMatrix& l, double slack = 1e-10) {
    if (!is_hermitian(l)) throw NotHermitian("lemma1_check: L must be Hermitian");
    if (a.dim() != b.dim() || a.dim() != l.rows()) {
        throw DimensionMismatch("lemma1_check: dimensions disagree");
    }
    const ComplexMatrix& A = a.matrix();
    const ComplexMatrix& B = b.matrix();
    const ComplexMatrix LA = l * A;
    const ComplexMatrix AL = A * l;
    const ComplexMatrix LB = l * B;
    const ComplexMatrix BL = B * l;

    const Complex t1 = (LA * LB).trace();                       // tr(L A L B)
    const Complex t2 = (B * (LA + AL)).trace();                 // tr(B(LA + AL))
    const Complex t3 = BL.trace() + AL.trace();                 // tr(BL + AL)
    const Complex t4 = (B * A).trace();
    const Complex combo = t1 - 0.5 * t2 * t3 + t4 * BL.trace() * AL.trace();

    Lemma1Result out;
    out.lhs = std::abs(combo);
    const double norm_l = operator_norm_hermitian(l);
    out.rhs = 18.0 * norm_l * norm_l *
              ((ComplexMatrix::Identity(A.rows(), A.cols()) - A) * B).trace().real();
    out.holds = out.lhs <= out.rhs + slack;
    return out;
}

struct Lemma1Counterexample {
    ComplexMatrix a, b, l;
    double lhs = 0.0, rhs = 0.0;
};

struct Lemma1Sweep {
    int d = 0;
    int64_t n_triples = 0;
    int64_t violations = 0;
    double max_lhs_minus_rhs = -1e300;  // worst margin seen (negative = all good)
    std::vector<Lemma1Counterexample> counterexamples;
};

inline Lemma1Sweep lemma1_sweep(int d, int64_t n_triples, uint64_t seed, double slack = 1e-10,
                                int n_threads = 1) {
    Lemma1Sweep sweep;
    sweep.d = d;
    sweep.n_triples = n_triples;
    const int workers = resolve_threads(n_threads);
    std::vector<Lemma1Sweep> partial(workers);
    parallel_for_blocks(n_triples, workers, [&](int w, int64_t begin, int64_t end) {
        Lemma1Sweep& local = partial[w];
        for (int64_t i = begin; i < end; ++i) {
            Rng rng(seed, (static_cast<uint64_t>(d) << 48) | static_cast<uint64_t>(i));
            const DensityMatrix a = random_density(rng, d);
            const DensityMatrix b = random_density(rng, d);
            const ComplexMatrix l = random_hermitian(rng, d);
            const Lemma1Result r = lemma1_check(a, b, l, slack);
            local.max_lhs_minus_rhs = std::max(local.max_lhs_minus_rhs, r.lhs - r.rhs);
            if (!r.holds) {
                ++local.violations;
                if (local.counterexamples.size() < 16) {
                    local.counterexamples.push_back({a.matrix(), b.matrix(), l, r.lhs, r.rhs});
                }
            }
        }
    });
    for (const Lemma1Sweep& p : partial) {
        sweep.violations += p.violations;
        sweep.max_lhs_minus_rhs = std::max(sweep.max_lhs_minus_rhs, p.max_lhs_minus_rhs);
        for (const auto& ce : p.counterexamples) {
            if (sweep.counterexamples.size() < 16) sweep.counterexamples.push_back(ce);
        }
    }
    return sweep;
}

// ---------------------------------------------------------------------------
// propagation-of-chaos experiment
// ---------------------------------------------------------------------------

struct ChaosReport {
    int n_particles = 0;
    int n_paths = 0;
    double alpha0 = 0.0;
    std::vector<double> times;
    std::vector<double> alpha_mean;
    std::vector<double> alpha_se;
    // smallest c with mean_t <= e^{ct} (alpha0 + 1/sqrt(N)) at all recorded t
    double fitted_c = 0.0;
};

namespace detail {

inline bool is_qubit_qnd(const ModelParams& p) {
    return p.dim() == 2 && (p.H - sigma_z()).norm() < 1e-14 &&
           (p.L - sigma_z()).norm() < 1e-14 && (p.Hhat - sigma_x()).norm() < 1e-14;
}

} // namespace detail

// Couples the N-particle filter with a mean-field reference driven by the
// same noise as particle 1 and reports E[alpha_N(t)] with standard errors.
// The reference's law m_t comes from the deterministic mean equation, which
// is exact in the absence of control.
inline std::vector<ChaosReport> chaos_experiment(const DensityMatrix& rho0,
                                                 const ModelParams& params,
                                                 std::span<const int> Ns, const TimeGrid& grid,
                                                 int n_paths, uint64_t seed,
                                                 int record_every = 10, int n_threads = 1) {
    params.validate();
    if (params.eta != 1.0) throw EtaNotOne("chaos_experiment requires eta = 1");
    if (!params.kernel) throw MissingKernel("chaos_experiment: kernel required");
    if (n_paths < 1) throw EmptyEnsemble("chaos_experiment: n_paths >= 1");
    const int d = static_cast<int>(params.dim());
    for (int n : Ns) {
        if (d == 2 && n > 8) throw TooManyParticles("chaos_experiment: N <= 8 for d = 2");
        detail::check_particle_budget(n, d);
    }

    // deterministic mean-field law (no control)
    const std::vector<ComplexMatrix> mean_law =
        integrate_lindblad_mean(params, rho0.matrix(), grid);

    // recorded steps: 0, every record_every-th, and the final step
    std::vector<int64_t> rec_steps;
    rec_steps.push_back(0);
    for (int64_t s = 1; s <= grid.n_steps; ++s) {
        if (s == grid.n_steps || (record_every > 0 && s % record_every == 0)) {
            rec_steps.push_back(s);
        }
    }
    const size_t n_rec = rec_steps.size();

    std::vector<ChaosReport> reports;
    const int workers = resolve_threads(n_threads);

    for (int n : Ns) {
        const uint64_t seed_n = derive_seed(seed, static_cast<uint64_t>(n));
        const ComplexMatrix joint0 = tensor_power(rho0.matrix(), n);
        const bool fast = detail::is_qubit_qnd(params);

        std::vector<std::vector<ExactSum>> sum(workers, std::vector<ExactSum>(n_rec));
        std::vector<std::vector<ExactSum>> sumsq(workers, std::vector<ExactSum>(n_rec));

        parallel_for_blocks(n_paths, workers, [&](int w, int64_t begin, int64_t end) {
            MatrixModel reference = belavkin_meanfield(
                params, zero_law(),
                [&mean_law](int64_t step) { return mean_law[static_cast<size_t>(step)]; });
            const TensorLayout lay(n, d);
            for (int64_t p = begin; p < end; ++p) {
                MatrixModel joint = fast ? nqubit_system(n, params.eta, zero_law(),
                                                         *params.kernel)
                                         : belavkin_nparticle(params, n, zero_law());
                NoisePlan plan{derive_seed(seed_n, static_cast<uint64_t>(p)), n};
                ComplexMatrix big = joint0, big_next = joint0, big_buf = joint0;
                ComplexMatrix small = rho0.matrix(), small_next = small, small_buf = small;
                std::vector<double> dW(static_cast<size_t>(n));
                size_t rec_idx = 0;
                auto record_alpha = [&](int64_t step) {
                    if (rec_idx < n_rec && rec_steps[rec_idx] == step) {
                        const ComplexMatrix marg =
                            project_state(partial_trace_raw(big, lay, 1)).state.matrix();
                        const double alpha = 1.0 - (small * marg).trace().real();
                        sum[w][rec_idx].add(alpha);
                        sumsq[w][rec_idx].add(alpha * alpha);
                        ++rec_idx;
                    }
                };
                record_alpha(0);
                for (int64_t step = 0; step < grid.n_steps; ++step) {
                    StepContext ctx{step, grid.t(step), grid.dt, 0.0};
                    for (int k = 0; k < n; ++k) dW[k] = plan.increment(step, k, grid.dt);
                    detail::advance_in_place(joint, big, ctx, dW.data(), big_next, big_buf);
                    detail::advance_in_place(reference, small, ctx, dW.data(), small_next,
                                             small_buf);
                    record_alpha(step + 1);
                }
            }
        });

        ChaosReport rep;
        rep.n_particles = n;
        rep.n_paths = n_paths;
        rep.times.resize(n_rec);
        rep.alpha_mean.resize(n_rec);
        rep.alpha_se.resize(n_rec);
        for (size_t r = 0; r < n_rec; ++r) {
            ExactSum s1, s2;
            for (int w = 0; w < workers; ++w) {
                s1.combine(sum[w][r]);
                s2.combine(sumsq[w][r]);
            }
            const double mean = s1.mean(n_paths);
            const double var =
                std::max(0.0, s2.mean(n_paths) - mean * mean) * n_paths / std::max(1, n_paths - 1);
            rep.times[r] = grid.t(rec_steps[r]);
            rep.alpha_mean[r] = mean;
            rep.alpha_se[r] = std::sqrt(var / n_paths);
        }
        rep.alpha0 = rep.alpha_mean[0];
        const double floor = rep.alpha0 + 1.0 / std::sqrt(static_cast<double>(n));
        double c = 0.0;
        for (size_t r = 1; r < n_rec; ++r) {
            if (rep.alpha_mean[r] > 0.0 && rep.times[r] > 0.0) {
                c = std::max(c, std::log(rep.alpha_mean[r] / floor) / rep.times[r]);
            }
        }
        rep.fitted_c = c;
        reports.push_back(std::move(rep));
    }
    return reports;
}

struct ChaosScalingFit {
    double slope = 0.0;
    double slope_se = 0.0;
    bool negative_95 = false;  // slope + 1.96 se < 0
};

// Weighted least-squares slope of log E[alpha_N(T)] against log N.
inline ChaosScalingFit chaos_scaling_fit(std::span<const ChaosReport> reports) {
    if (reports.size() < 2) throw EmptyInput("chaos_scaling_fit: need >= 2 reports");
    std::vector<double> x, y, wgt;
    for (const ChaosReport& r : reports) {
        const double mean = r.alpha_mean.back();
        const double se = r.alpha_se.back();
        if (mean <= 0.0) throw ExperimentFailed("chaos_scaling_fit: nonpositive mean alpha");
        x.push_back(std::log(static_cast<double>(r.n_particles)));
        y.push_back(std::log(mean));
        const double se_log = std::max(1e-12, se / mean);
        wgt.push_back(1.0 / (se_log * se_log));
    }
    double sw = 0, swx = 0, swy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sw += wgt[i];
        swx += wgt[i] * x[i];
        swy += wgt[i] * y[i];
    }
    const double xbar = swx / sw, ybar = swy / sw;
    double num = 0, den = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        num += wgt[i] * (x[i] - xbar) * (y[i] - ybar);
        den += wgt[i] * (x[i] - xbar) * (x[i] - xbar);
    }
    ChaosScalingFit fit;
    fit.slope = num / den;
    fit.slope_se = std::sqrt(1.0 / den);
    fit.negative_95 = fit.slope + 1.96 * fit.slope_se < 0.0;
    return fit;
}

// ---------------------------------------------------------------------------
// state-reduction statistics
// ---------------------------------------------------------------------------

struct ReductionReport {
    int64_t n_paths = 0;
    double fraction_reduced = 0.0;  // |z_T| > threshold
    double fraction_up = 0.0;       // z_T > 0
    double z0 = 0.0;
    double born_prediction = 0.0;   // (1 + z0) / 2
    double threshold = 0.0;
};

inline ReductionReport reduction_stats(std::span<const TrajectoryRecord<BlochVector>> records,
                                       double threshold) {
    if (records.empty() || records[0].states.empty()) {
        throw EmptyInput("reduction_stats: no trajectories");
    }
    ReductionReport rep;
    rep.n_paths = static_cast<int64_t>(records.size());
    rep.threshold = threshold;
    rep.z0 = records[0].states.front().z;
    int64_t reduced = 0, up = 0;
    for (const auto& rec : records) {
        if (rec.states.empty()) throw EmptyInput("reduction_stats: empty trajectory");
        const double zT = rec.states.back().z;
        if (std::fabs(zT) > threshold) ++reduced;
        if (zT > 0.0) ++up;
    }
    rep.fraction_reduced = static_cast<double>(reduced) / static_cast<double>(rep.n_paths);
    rep.fraction_up = static_cast<double>(up) / static_cast<double>(rep.n_paths);
    rep.born_prediction = 0.5 * (1.0 + rep.z0);
    return rep;
}

inline ReductionReport reduction_stats_from_finals(std::span<const double> z_finals, double z0,
                                                   double threshold) {
    if (z_finals.empty()) throw EmptyInput("reduction_stats: no finals");
    ReductionReport rep;
    rep.n_paths = static_cast<int64_t>(z_finals.size());
    rep.threshold = threshold;
    rep.z0 = z0;
    int64_t reduced = 0, up = 0;
    for (double z : z_finals) {
        if (std::fabs(z) > threshold) ++reduced;
        if (z > 0.0) ++up;
    }
    rep.fraction_reduced = static_cast<double>(reduced) / static_cast<double>(rep.n_paths);
    rep.fraction_up = static_cast<double>(up) / static_cast<double>(rep.n_paths);
    rep.born_prediction = 0.5 * (1.0 + z0);
    return rep;
}

// ---------------------------------------------------------------------------
// purity tracking
// ---------------------------------------------------------------------------

struct PuritySeries {
    std::vector<double> values;
    double min_purity = 1.0;
    double final_purity = 1.0;
};

inline PuritySeries purity_track(const TrajectoryRecord<ComplexMatrix>& record) {
    PuritySeries out;
    for (const ComplexMatrix& s : record.states) out.values.push_back(purity(s));
    if (!out.values.empty()) {
        out.min_purity = *std::min_element(out.values.begin(), out.values.end());
        out.final_purity = out.values.back();
    }
    return out;
}

inline PuritySeries purity_track(const TrajectoryRecord<BlochVector>& record) {
    PuritySeries out;
    for (const BlochVector& v : record.states) {
        const double n2 = v.x * v.x + v.y * v.y + v.z * v.z;
        out.values.push_back(0.5 * (1.0 + n2));
    }
    if (!out.values.empty()) {
        out.min_purity = *std::min_element(out.values.begin(), out.values.end());
        out.final_purity = out.values.back();
    }
    return out;
}

} // namespace qmf
