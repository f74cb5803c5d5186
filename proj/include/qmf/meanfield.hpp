#pragma once

#include <atomic>
#include <barrier>
#include <cstdint>
#include <functional>
#include <vector>

#include "qmf/accum.hpp"
#include "qmf/models.hpp"
#include "qmf/parallel.hpp"
#include "qmf/sde_engine.hpp"

namespace qmf {

// Mean-field law m_t sampled at every grid point (no interpolation; solver
// and model share one grid).
template <class State>
struct MeanFlow {
    TimeGrid grid;
    std::vector<State> values;  // size grid.n_points()

    static MeanFlow constant(const TimeGrid& grid, const State& value) {
        MeanFlow f;
        f.grid = grid;
        f.values.assign(static_cast<size_t>(grid.n_points()), value);
        return f;
    }
};

namespace detail {

inline size_t state_components(const ComplexMatrix& m) {
    return static_cast<size_t>(2 * m.size());
}
inline size_t state_components(const BlochVector&) { return 3; }

inline void state_accumulate(std::vector<ExactSum>& acc, size_t off, const ComplexMatrix& m) {
    const Complex* p = m.data();
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        acc[off + 2 * i].add(p[i].real());
        acc[off + 2 * i + 1].add(p[i].imag());
    }
}
inline void state_accumulate(std::vector<ExactSum>& acc, size_t off, const BlochVector& v) {
    acc[off].add(v.x);
    acc[off + 1].add(v.y);
    acc[off + 2].add(v.z);
}

inline void state_from_mean(const std::vector<ExactSum>& acc, size_t off, int64_t n,
                            ComplexMatrix& out) {
    Complex* p = out.data();
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        p[i] = Complex(acc[off + 2 * i].mean(n), acc[off + 2 * i + 1].mean(n));
    }
}
inline void state_from_mean(const std::vector<ExactSum>& acc, size_t off, int64_t n,
                            BlochVector& out) {
    out = {acc[off].mean(n), acc[off + 1].mean(n), acc[off + 2].mean(n)};
}

inline double state_distance(const ComplexMatrix& a, const ComplexMatrix& b) {
    return (a - b).norm();
}
inline double state_distance(const BlochVector& a, const BlochVector& b) {
    const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

} // namespace detail

template <class State>
double flow_distance(const MeanFlow<State>& a, const MeanFlow<State>& b) {
    if (a.values.size() != b.values.size()) {
        throw DimensionMismatch("flow_distance: flows on different grids");
    }
    double best = 0.0;
    for (size_t i = 0; i < a.values.size(); ++i) {
        best = std::max(best, detail::state_distance(a.values[i], b.values[i]));
    }
    return best;
}

// Factories hand a mean lookup to the model builder; the solvers decide
// whether the lookup reads a live empirical mean or a frozen flow.
template <class State>
using MeanLookup = std::function<State(int64_t step)>;
template <class State>
using MeanCoupledFactory = std::function<SdeModel<State>(MeanLookup<State>)>;

template <class State>
struct ParticleSolveResult {
    MeanFlow<State> mean;
    std::vector<TrajectoryRecord<State>> records;  // empty when record_every <= 0
    int64_t lockstep_checks = 0;                   // mean-version reads that were verified
};

// ---------------------------------------------------------------------------
// interacting particle method
// ---------------------------------------------------------------------------

// N coupled copies in lockstep: every particle's step k -> k+1 reads the
// step-k empirical mean, recomputed exactly (order-independent fixed-point
// accumulation) so the flow is bit-identical under particle permutation and
// any thread count. Each particle owns noise channel 0 of its own seed.
template <class State>
ParticleSolveResult<State> solve_particles(const MeanCoupledFactory<State>& factory,
                                           const State& x0, int64_t n_particles,
                                           const TimeGrid& grid,
                                           const std::vector<uint64_t>& particle_seeds,
                                           int record_every = 0, int n_threads = 1) {
    if (n_particles < 1) throw EmptyEnsemble("solve_particles: N >= 1 required");
    if (static_cast<int64_t>(particle_seeds.size()) != n_particles) {
        throw DimensionMismatch("solve_particles: seed count != N");
    }
    n_threads = static_cast<int>(
        std::max<int64_t>(1, std::min<int64_t>(resolve_threads(n_threads), n_particles)));

    const size_t comps = detail::state_components(x0);
    const int64_t n_steps = grid.n_steps;

    // published empirical mean for the current step
    struct Published {
        State value;
        std::atomic<int64_t> version{-1};
    } shared;
    shared.value = x0;

    std::atomic<int64_t> lockstep_checks{0};
    MeanLookup<State> lookup = [&shared, &lockstep_checks](int64_t step) -> State {
        if (shared.version.load(std::memory_order_acquire) != step) {
            throw LockstepViolated("mean read at step " + std::to_string(step) +
                                   " but published version is " +
                                   std::to_string(shared.version.load()));
        }
        lockstep_checks.fetch_add(1, std::memory_order_relaxed);
        return shared.value;
    };

    std::vector<State> states(static_cast<size_t>(n_particles), x0);
    std::vector<NoisePlan> plans;
    plans.reserve(n_particles);
    for (int64_t p = 0; p < n_particles; ++p) plans.push_back(NoisePlan{particle_seeds[p], 1});

    ParticleSolveResult<State> result;
    result.mean.grid = grid;
    result.mean.values.reserve(static_cast<size_t>(grid.n_points()));
    if (record_every > 0) {
        result.records.assign(static_cast<size_t>(n_particles), TrajectoryRecord<State>{});
    }

    // per-worker accumulators for the next-step mean
    std::vector<std::vector<ExactSum>> partial(n_threads, std::vector<ExactSum>(comps));

    auto combine_mean = [&](int64_t count) {
        std::vector<ExactSum> total(comps);
        for (int w = 0; w < n_threads; ++w) {
            for (size_t i = 0; i < comps; ++i) total[i].combine(partial[w][i]);
            for (size_t i = 0; i < comps; ++i) partial[w][i].reset();
        }
        State mean = x0;  // shape carrier
        detail::state_from_mean(total, 0, count, mean);
        return mean;
    };

    // initial mean (step 0)
    for (int64_t p = 0; p < n_particles; ++p) detail::state_accumulate(partial[0], 0, states[p]);
    shared.value = combine_mean(n_particles);
    shared.version.store(0, std::memory_order_release);
    result.mean.values.push_back(shared.value);

    auto worker_pass = [&](int w, int64_t begin, int64_t end, int64_t step,
                           SdeModel<State>& model, State& xnext, State& buf,
                           std::vector<double>& dW, std::vector<double>& dY) {
        const double sqrt_eta = std::sqrt(model.eta);
        for (int64_t p = begin; p < end; ++p) {
            State& x = states[static_cast<size_t>(p)];
            StepContext ctx{step, grid.t(step), grid.dt, 0.0};
            ctx.u = model.control ? model.control(x, step) : 0.0;
            for (int k = 0; k < model.n_channels; ++k) {
                dW[k] = plans[static_cast<size_t>(p)].increment(step, k, grid.dt);
                dY[k] = dW[k] + sqrt_eta * (model.signal ? model.signal(x, k) : 0.0) * grid.dt;
            }
            if (record_every > 0 && step == 0) {
                auto& rec = result.records[static_cast<size_t>(p)];
                rec.grid = grid;
                rec.n_channels = model.n_channels;
                rec.times.push_back(grid.t(0));
                rec.diagnostics.push_back(detail::diagnose(x));
                rec.states.push_back(detail::record_state(x));
                rec.controls.push_back(ctx.u);
                rec.wiener.push_back(std::vector<double>(model.n_channels, 0.0));
                rec.observation.push_back(std::vector<double>(model.n_channels, 0.0));
            }
            detail::advance_in_place(model, x, ctx, dW.data(), xnext, buf);
            detail::state_accumulate(partial[w], 0, x);
            const bool last = (step + 1 == n_steps);
            if (record_every > 0 && (last || (step + 1) % record_every == 0)) {
                auto& rec = result.records[static_cast<size_t>(p)];
                rec.times.push_back(grid.t(step + 1));
                rec.diagnostics.push_back(detail::diagnose(x));
                rec.states.push_back(detail::record_state(x));
                rec.controls.push_back(model.control ? model.control(x, step + 1) : 0.0);
                rec.wiener.push_back(dW);
                rec.observation.push_back(dY);
            }
        }
    };

    if (n_threads == 1) {
        SdeModel<State> model = factory(lookup);
        State xnext = x0, buf = x0;
        std::vector<double> dW(model.n_channels), dY(model.n_channels);
        for (int64_t step = 0; step < n_steps; ++step) {
            worker_pass(0, 0, n_particles, step, model, xnext, buf, dW, dY);
            shared.value = combine_mean(n_particles);
            shared.version.store(step + 1, std::memory_order_release);
            result.mean.values.push_back(shared.value);
        }
    } else {
        std::exception_ptr first_error;
        std::mutex error_mutex;
        std::atomic<bool> failed{false};
        std::atomic<int64_t> published_step{0};

        auto on_phase_done = [&]() noexcept {
            if (failed.load()) return;
            try {
                const int64_t step = published_step.load();
                shared.value = combine_mean(n_particles);
                shared.version.store(step + 1, std::memory_order_release);
                result.mean.values.push_back(shared.value);
                published_step.store(step + 1);
            } catch (...) {
                failed.store(true);
            }
        };
        std::barrier sync(n_threads, on_phase_done);

        const int64_t chunk = (n_particles + n_threads - 1) / n_threads;
        std::vector<std::thread> pool;
        for (int w = 0; w < n_threads; ++w) {
            const int64_t begin = std::min<int64_t>(w * chunk, n_particles);
            const int64_t end = std::min<int64_t>(begin + chunk, n_particles);
            pool.emplace_back([&, w, begin, end] {
                try {
                    SdeModel<State> model = factory(lookup);
                    State xnext = x0, buf = x0;
                    std::vector<double> dW(model.n_channels), dY(model.n_channels);
                    for (int64_t step = 0; step < n_steps; ++step) {
                        if (!failed.load()) {
                            worker_pass(w, begin, end, step, model, xnext, buf, dW, dY);
                        }
                        sync.arrive_and_wait();
                        if (failed.load()) break;
                    }
                } catch (...) {
                    {
                        std::lock_guard<std::mutex> lock(error_mutex);
                        if (!first_error) first_error = std::current_exception();
                    }
                    failed.store(true);
                    sync.arrive_and_drop();
                }
            });
        }
        for (auto& t : pool) t.join();
        if (first_error) std::rethrow_exception(first_error);
        if (failed.load()) throw ExperimentFailed("solve_particles: worker failure");
    }

    result.lockstep_checks = lockstep_checks.load();
    return result;
}

template <class State>
ParticleSolveResult<State> solve_particles(const MeanCoupledFactory<State>& factory,
                                           const State& x0, int64_t n_particles,
                                           const TimeGrid& grid, uint64_t seed,
                                           int record_every = 0, int n_threads = 1) {
    std::vector<uint64_t> seeds(static_cast<size_t>(n_particles));
    for (int64_t p = 0; p < n_particles; ++p) {
        seeds[static_cast<size_t>(p)] = derive_seed(seed, static_cast<uint64_t>(p));
    }
    return solve_particles(factory, x0, n_particles, grid, seeds, record_every, n_threads);
}

// ---------------------------------------------------------------------------
// Picard fixed-point iteration
// ---------------------------------------------------------------------------

struct PicardOptions {
    int n_paths = 2000;
    int max_iter = 20;
    double tol = 5e-3;  // Frobenius sup-norm between consecutive flows
    int n_threads = 1;
};

template <class State>
struct PicardResult {
    MeanFlow<State> flow;
    std::vector<double> distances;  // sup-distance per iteration
    bool converged = false;
};

namespace detail {

inline void state_accumulate_sq(std::vector<ExactSum>& acc, size_t off,
                                const ComplexMatrix& m) {
    const Complex* p = m.data();
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        acc[off + 2 * i].add(p[i].real() * p[i].real());
        acc[off + 2 * i + 1].add(p[i].imag() * p[i].imag());
    }
}
inline void state_accumulate_sq(std::vector<ExactSum>& acc, size_t off, const BlochVector& v) {
    acc[off].add(v.x * v.x);
    acc[off + 1].add(v.y * v.y);
    acc[off + 2].add(v.z * v.z);
}

// One application of the fixed-point map: Monte Carlo estimate of the mean
// flow of the frozen-mean equation, with common random numbers (path p uses
// derive_seed(seed, p) in every call). When se_frob is given, it receives
// the per-gridpoint standard error of the estimated mean in Frobenius norm.
template <class State>
MeanFlow<State> apply_mean_map(const MeanCoupledFactory<State>& factory,
                               const MeanFlow<State>& frozen, const State& x0, uint64_t seed,
                               int n_paths, int n_threads,
                               std::vector<double>* se_frob = nullptr) {
    const TimeGrid grid = frozen.grid;
    const size_t comps = state_components(x0);
    const size_t n_points = static_cast<size_t>(grid.n_points());

    std::vector<std::vector<ExactSum>> partial(
        n_threads, std::vector<ExactSum>(comps * n_points));
    std::vector<std::vector<ExactSum>> partial_sq(
        se_frob ? n_threads : 0, std::vector<ExactSum>(comps * n_points));

    parallel_for_blocks(n_paths, n_threads, [&](int w, int64_t begin, int64_t end) {
        MeanLookup<State> lookup = [&frozen](int64_t step) {
            return frozen.values[static_cast<size_t>(step)];
        };
        SdeModel<State> model = factory(lookup);
        State xnext = x0, buf = x0;
        std::vector<double> dW(model.n_channels);
        auto& acc = partial[w];
        for (int64_t p = begin; p < end; ++p) {
            NoisePlan plan{derive_seed(seed, static_cast<uint64_t>(p)), model.n_channels};
            State x = x0;
            state_accumulate(acc, 0, x);
            if (se_frob) state_accumulate_sq(partial_sq[w], 0, x);
            for (int64_t step = 0; step < grid.n_steps; ++step) {
                StepContext ctx{step, grid.t(step), grid.dt, 0.0};
                ctx.u = model.control ? model.control(x, step) : 0.0;
                for (int k = 0; k < model.n_channels; ++k) {
                    dW[k] = plan.increment(step, k, grid.dt);
                }
                advance_in_place(model, x, ctx, dW.data(), xnext, buf);
                state_accumulate(acc, comps * static_cast<size_t>(step + 1), x);
                if (se_frob) {
                    state_accumulate_sq(partial_sq[w], comps * static_cast<size_t>(step + 1),
                                        x);
                }
            }
        }
    });

    std::vector<ExactSum> total(comps * n_points);
    for (int w = 0; w < n_threads; ++w) {
        for (size_t i = 0; i < total.size(); ++i) total[i].combine(partial[w][i]);
    }
    MeanFlow<State> out;
    out.grid = grid;
    out.values.assign(n_points, x0);
    for (size_t k = 0; k < n_points; ++k) {
        state_from_mean(total, comps * k, n_paths, out.values[k]);
    }
    if (se_frob) {
        std::vector<ExactSum> total_sq(comps * n_points);
        for (int w = 0; w < n_threads; ++w) {
            for (size_t i = 0; i < total_sq.size(); ++i) total_sq[i].combine(partial_sq[w][i]);
        }
        se_frob->assign(n_points, 0.0);
        for (size_t k = 0; k < n_points; ++k) {
            double var_sum = 0.0;
            for (size_t c = 0; c < comps; ++c) {
                const double mean_sq = total_sq[comps * k + c].mean(n_paths);
                const double mean = total[comps * k + c].mean(n_paths);
                var_sum += std::max(0.0, mean_sq - mean * mean);
            }
            (*se_frob)[k] = std::sqrt(var_sum / n_paths);
        }
    }
    return out;
}

} // namespace detail

// Fixed-point iteration for the mean-field law: starts from the constant
// flow at x0 and repeats flow <- MeanMap(flow) until the sup-distance
// between consecutive flows drops below tol. Not converging is reported,
// not thrown: the last iterate is still returned with the distance log.
template <class State>
PicardResult<State> picard_solve(const MeanCoupledFactory<State>& factory, const State& x0,
                                 const TimeGrid& grid, uint64_t seed,
                                 const PicardOptions& opt = {}) {
    if (opt.n_paths < 1) throw EmptyEnsemble("picard_solve: n_paths >= 1 required");
    if (!(opt.tol > 0.0)) throw ConfigInvalid("picard_solve: tol must be positive");
    PicardResult<State> result;
    result.flow = MeanFlow<State>::constant(grid, x0);
    const int n_threads = resolve_threads(opt.n_threads);
    for (int it = 0; it < opt.max_iter; ++it) {
        MeanFlow<State> next = detail::apply_mean_map(factory, result.flow, x0, seed,
                                                      opt.n_paths, n_threads);
        const double dist = flow_distance(next, result.flow);
        result.distances.push_back(dist);
        result.flow = std::move(next);
        if (dist <= opt.tol) {
            result.converged = true;
            break;
        }
    }
    return result;
}

// Empirical contraction ratio of the mean map on a pair of flows, using
// common random numbers. Diagnostic only.
template <class State>
double contraction_probe(const MeanCoupledFactory<State>& factory, const State& x0,
                         const MeanFlow<State>& flow1, const MeanFlow<State>& flow2,
                         uint64_t seed, int n_paths, int n_threads = 1) {
    const double denom = flow_distance(flow1, flow2);
    if (denom < 1e-15) throw ZeroDistance("contraction_probe: flows coincide");
    const int workers = resolve_threads(n_threads);
    const MeanFlow<State> image1 =
        detail::apply_mean_map(factory, flow1, x0, seed, n_paths, workers);
    const MeanFlow<State> image2 =
        detail::apply_mean_map(factory, flow2, x0, seed, n_paths, workers);
    return flow_distance(image1, image2) / denom;
}

} // namespace qmf
