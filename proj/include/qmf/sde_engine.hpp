#pragma once

#include <functional>
#include <span>
#include <vector>

#include "qmf/complex_matrix.hpp"
#include "qmf/density.hpp"
#include "qmf/rng.hpp"
#include "qmf/time_grid.hpp"

namespace qmf {

// ---------------------------------------------------------------------------
// state projection
// ---------------------------------------------------------------------------

struct Projected {
    DensityMatrix state;
    double distance = 0.0;       // ||projected - input||_F
    double trace_before = 0.0;
    double min_eig_before = 0.0;
};

namespace detail {

// Closed-form eigen-clip for 2x2 Hermitian input; avoids a dense solver in
// the per-step hot loop of the qubit models.
inline bool project2x2(const ComplexMatrix& h, ComplexMatrix& out, double& min_eig) {
    const double a = h(0, 0).real(), c = h(1, 1).real();
    const Complex b = h(0, 1);
    const double mid = 0.5 * (a + c);
    const double r = std::sqrt(0.25 * (a - c) * (a - c) + std::norm(b));
    const double lo = mid - r, hi = mid + r;
    min_eig = lo;
    if (lo >= 0.0) {
        out = h;
        const double tr = a + c;
        if (tr < 1e-6) return false;
        out /= tr;
        return true;
    }
    // clip the negative eigenvalue: remaining state is the top eigenprojector
    if (hi <= 1e-6) return false;
    out = (h - lo * ComplexMatrix::Identity(2, 2)) / (hi - lo);
    return true;
}

} // namespace detail

// Hermitize, clip negative eigenvalues to zero, renormalize the trace to one.
inline Projected project_state(const ComplexMatrix& m) {
    require_square(m, "project_state");
    if (!m.allFinite()) throw NonFinite("project_state: non-finite entries");
    const ComplexMatrix h = hermitize(m);
    const double trace_before = h.trace().real();
    ComplexMatrix projected;
    double min_eig = 0.0;
    if (m.rows() == 2) {
        if (!detail::project2x2(h, projected, min_eig)) {
            throw DegenerateState("trace after clipping below 1e-6");
        }
    } else {
        Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
        min_eig = es.eigenvalues().minCoeff();
        Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
        const double tr = ev.sum();
        if (tr < 1e-6) throw DegenerateState("trace after clipping below 1e-6");
        ev /= tr;
        projected = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
    }
    Projected out{DensityMatrix::unchecked(projected), (projected - m).norm(), trace_before,
                  min_eig};
    return out;
}

// Cheap per-step repair for large joint states: restores Hermiticity and the
// unit trace exactly; eigenvalue clipping is deferred to recorded copies.
// In-place triangular sweep, no temporaries.
inline void hermitize_renormalize_inplace(ComplexMatrix& m) {
    const Eigen::Index D = m.rows();
    double tr = 0.0;
    for (Eigen::Index c = 0; c < D; ++c) {
        Complex* col = m.data() + c * D;
        col[c] = Complex(col[c].real(), 0.0);
        tr += col[c].real();
        for (Eigen::Index r = 0; r < c; ++r) {
            const Complex v = 0.5 * (col[r] + std::conj(m(c, r)));
            col[r] = v;
            m(c, r) = std::conj(v);
        }
    }
    if (tr < 1e-6) throw DegenerateState("trace collapsed to " + std::to_string(tr));
    m *= (1.0 / tr);
}

inline BlochVector project_bloch(const BlochVector& v) {
    if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z)) {
        throw NonFinite("project_bloch: non-finite component");
    }
    const double n = v.norm();
    if (n <= 1.0) return v;
    return (1.0 / n) * v;
}

// ---------------------------------------------------------------------------
// observation process
// ---------------------------------------------------------------------------

inline void check_efficiency(double eta) {
    if (!(eta > 0.0) || eta > 1.0) {
        throw EfficiencyOutOfRange("eta = " + std::to_string(eta) + " not in (0, 1]");
    }
}

// dY = dW + sqrt(eta) tr((L + L^dag) rho) dt
inline double observation_increment(const DensityMatrix& rho, const ComplexMatrix& l,
                                    double eta, double dW, double dt) {
    check_efficiency(eta);
    const double signal = ((l + l.adjoint().eval()) * rho.matrix()).trace().real();
    return dW + std::sqrt(eta) * signal * dt;
}

// ---------------------------------------------------------------------------
// SDE models and stepping
// ---------------------------------------------------------------------------

struct StepContext {
    int64_t step = 0;
    double t = 0.0;
    double dt = 0.0;
    double u = 0.0;
};

// Drift/diffusion specification consumable by the stepper. Instances may own
// scratch buffers, so one instance serves one trajectory at a time; build a
// fresh instance per concurrent worker.
template <class State>
struct SdeModel {
    int n_channels = 1;
    double eta = 1.0;

    // clamped feedback value used for this step (and recorded)
    std::function<double(const State&, int64_t)> control;
    std::function<void(const State&, const StepContext&, State&)> drift;
    std::function<void(const State&, const StepContext&, int, State&)> diffusion;
    // tr((L_k + L_k^dag) x); dY_k = dW_k + sqrt(eta) * signal_k * dt
    std::function<double(const State&, int)> signal;
    // optional: out = x + drift dt + sum_k diffusion_k dW_k in one pass
    std::function<void(const State&, const StepContext&, const double*, State&)> fused_update;
};

// One Euler-Maruyama step followed by projection back to the state space.
inline DensityMatrix euler_step(
    const DensityMatrix& rho,
    const std::function<ComplexMatrix(const ComplexMatrix&)>& drift,
    std::span<const std::function<ComplexMatrix(const ComplexMatrix&)>> diffusions,
    std::span<const double> dW, double dt) {
    if (diffusions.size() != dW.size()) {
        throw DimensionMismatch("euler_step: diffusion/increment count mismatch");
    }
    ComplexMatrix next = rho.matrix() + dt * drift(rho.matrix());
    for (size_t k = 0; k < diffusions.size(); ++k) {
        next += dW[k] * diffusions[k](rho.matrix());
    }
    if (!next.allFinite()) throw NonFinite("euler_step: non-finite state");
    return project_state(next).state;
}

inline BlochVector euler_step(const BlochVector& v,
                              const std::function<BlochVector(const BlochVector&)>& drift,
                              std::span<const std::function<BlochVector(const BlochVector&)>> diffusions,
                              std::span<const double> dW, double dt) {
    if (diffusions.size() != dW.size()) {
        throw DimensionMismatch("euler_step: diffusion/increment count mismatch");
    }
    BlochVector next = v + dt * drift(v);
    for (size_t k = 0; k < diffusions.size(); ++k) next += dW[k] * diffusions[k](v);
    return project_bloch(next);
}

// ---------------------------------------------------------------------------
// trajectory recording
// ---------------------------------------------------------------------------

struct StepDiagnostics {
    double trace_err = 0.0;
    double min_eig = 0.0;
    double purity = 0.0;
};

template <class State>
struct TrajectoryRecord {
    TimeGrid grid;
    int n_channels = 1;
    std::vector<double> times;
    std::vector<State> states;  // post-projection; pass validation at 1e-6
    std::vector<double> controls;
    std::vector<std::vector<double>> wiener;       // increments of the step into each record
    std::vector<std::vector<double>> observation;  // matching dY increments
    std::vector<StepDiagnostics> diagnostics;
};

namespace detail {

inline StepDiagnostics diagnose(const ComplexMatrix& pre_projection) {
    StepDiagnostics d;
    d.trace_err = std::abs(pre_projection.trace().real() - 1.0);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitize(pre_projection),
                                                    Eigen::EigenvaluesOnly);
    d.min_eig = es.eigenvalues().minCoeff();
    d.purity = purity(pre_projection);
    return d;
}

inline StepDiagnostics diagnose(const BlochVector& v) {
    const double n = v.norm();
    return {0.0, 0.5 * (1.0 - n), 0.5 * (1.0 + n * n)};
}

inline ComplexMatrix record_state(const ComplexMatrix& m) {
    return project_state(m).state.matrix();
}
inline BlochVector record_state(const BlochVector& v) { return project_bloch(v); }

inline void project_step(ComplexMatrix& m) {
    if (m.rows() <= 4) {
        m = project_state(m).state.matrix();
    } else {
        hermitize_renormalize_inplace(m);
    }
}
inline void project_step(BlochVector& v) { v = project_bloch(v); }

inline bool finite(const ComplexMatrix& m) { return m.allFinite(); }
inline bool finite(const BlochVector& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

template <class State>
void assemble_step(SdeModel<State>& model, const State& x, const StepContext& ctx,
                   const double* dW, State& out, State& buf) {
    if (model.fused_update) {
        model.fused_update(x, ctx, dW, out);
        return;
    }
    model.drift(x, ctx, buf);
    out = x + ctx.dt * buf;
    for (int k = 0; k < model.n_channels; ++k) {
        model.diffusion(x, ctx, k, buf);
        out += dW[k] * buf;
    }
}

// assemble, sanity-check, project, swap into x
template <class State>
void advance_in_place(SdeModel<State>& model, State& x, const StepContext& ctx,
                      const double* dW, State& xnext, State& buf) {
    assemble_step(model, x, ctx, dW, xnext, buf);
    if (!finite(xnext)) throw NonFinite("state left finite range");
    project_step(xnext);
    std::swap(x, xnext);
}

} // namespace detail

// Full Euler-Maruyama sweep. Deterministic given (model, x0, grid, seed);
// control is evaluated on the current state before each step. Records every
// `record_every`-th step plus the first and last; record_every <= 0 records
// only first and last.
template <class State>
TrajectoryRecord<State> run_trajectory(SdeModel<State>& model, const State& x0,
                                       const TimeGrid& grid, const NoisePlan& noise,
                                       int record_every = 10) {
    if (noise.n_channels != model.n_channels) {
        throw DimensionMismatch("run_trajectory: model wants " +
                                std::to_string(model.n_channels) + " channels, plan has " +
                                std::to_string(noise.n_channels));
    }
    TrajectoryRecord<State> rec;
    rec.grid = grid;
    rec.n_channels = model.n_channels;

    const double sqrt_eta = std::sqrt(model.eta);
    std::vector<double> dW(model.n_channels, 0.0), dY(model.n_channels, 0.0);

    State x = x0;
    State xnext = x0, buf = x0;

    auto record = [&](int64_t step, const std::vector<double>& w, const std::vector<double>& y) {
        rec.times.push_back(grid.t(step));
        rec.diagnostics.push_back(detail::diagnose(x));
        rec.states.push_back(detail::record_state(x));
        rec.controls.push_back(model.control ? model.control(x, step) : 0.0);
        rec.wiener.push_back(w);
        rec.observation.push_back(y);
    };

    record(0, std::vector<double>(model.n_channels, 0.0),
           std::vector<double>(model.n_channels, 0.0));

    for (int64_t step = 0; step < grid.n_steps; ++step) {
        try {
            StepContext ctx{step, grid.t(step), grid.dt, 0.0};
            ctx.u = model.control ? model.control(x, step) : 0.0;
            for (int k = 0; k < model.n_channels; ++k) {
                dW[k] = noise.increment(step, k, grid.dt);
                dY[k] = dW[k] + sqrt_eta * (model.signal ? model.signal(x, k) : 0.0) * grid.dt;
            }
            detail::advance_in_place(model, x, ctx, dW.data(), xnext, buf);
        } catch (const Error& e) {
            throw Error(e.code(), "step " + std::to_string(step) + ": " + e.what());
        }
        const bool last = (step + 1 == grid.n_steps);
        if (last || (record_every > 0 && (step + 1) % record_every == 0)) {
            record(step + 1, dW, dY);
        }
    }
    return rec;
}

} // namespace qmf
