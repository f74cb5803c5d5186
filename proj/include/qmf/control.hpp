#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "qmf/complex_matrix.hpp"
#include "qmf/density.hpp"
#include "qmf/rng.hpp"

namespace qmf {

// Feedback law u: S_d -> [-U, U]. Evaluation clamps to the declared bound;
// the raw (unclamped) value stays accessible for affinity checks. Laws on
// qubits also carry a Bloch-coordinate evaluator kept consistent with the
// matrix form.
class ControlLaw {
public:
    using MatrixFn = std::function<double(const ComplexMatrix&)>;
    using BlochFn = std::function<double(const BlochVector&)>;

    ControlLaw() = default;  // the zero law

    static ControlLaw zero() { return ControlLaw{}; }

    static ControlLaw constant(double value, double bound) {
        ControlLaw law;
        law.matrix_fn_ = [value](const ComplexMatrix&) { return value; };
        law.bloch_fn_ = [value](const BlochVector&) { return value; };
        law.bound_ = bound;
        law.lipschitz_ = 0.0;
        law.is_zero_ = (value == 0.0);
        return law;
    }

    static ControlLaw custom(MatrixFn fn, double bound, double lipschitz = unverified()) {
        ControlLaw law;
        law.matrix_fn_ = std::move(fn);
        law.bloch_fn_ = nullptr;
        law.bound_ = bound;
        law.lipschitz_ = lipschitz;
        law.is_zero_ = false;
        return law;
    }

    double evaluate(const ComplexMatrix& state) const {
        return clamp(raw(state));
    }

    double evaluate(const DensityMatrix& state) const { return evaluate(state.matrix()); }

    double evaluate(const BlochVector& v) const {
        if (bloch_fn_) return clamp(bloch_fn_(v));
        return evaluate(bloch_compose(v).matrix());
    }

    double raw(const ComplexMatrix& state) const { return matrix_fn_(state); }
    double raw(const BlochVector& v) const {
        return bloch_fn_ ? bloch_fn_(v) : matrix_fn_(bloch_compose(v).matrix());
    }

    double bound() const { return bound_; }
    double lipschitz() const { return lipschitz_; }
    bool is_zero() const { return is_zero_; }
    static double unverified() { return std::numeric_limits<double>::quiet_NaN(); }

private:
    double clamp(double u) const { return std::clamp(u, -bound_, bound_); }

    MatrixFn matrix_fn_ = [](const ComplexMatrix&) { return 0.0; };
    BlochFn bloch_fn_ = [](const BlochVector&) { return 0.0; };
    double bound_ = 1.0;
    double lipschitz_ = 0.0;
    bool is_zero_ = true;

    friend ControlLaw stabilizing_law(const DensityMatrix&, double, double);
};

inline ControlLaw zero_law() { return ControlLaw::zero(); }

// Target-stabilization law
//   u(g) = -c1 * i * tr([sigma_x, g] target) + c2 * (1 - tr(g target)),
// clamped to [-(c1 + c2), c1 + c2]. On S_2 both terms are bounded by c1 and
// c2 respectively, so the clamp only guards projected-state excursions.
inline ControlLaw stabilizing_law(const DensityMatrix& target, double c1 = 7.6,
                                  double c2 = 5.0) {
    if (target.dim() != 2) {
        throw WrongDimension("stabilizing_law: qubit target required");
    }
    const ComplexMatrix tgt = target.matrix();
    const BlochVector s = bloch_decompose(target);
    const ComplexMatrix sx = sigma_x();

    ControlLaw law;
    law.matrix_fn_ = [tgt, sx, c1, c2](const ComplexMatrix& g) {
        const Complex comm_term = (commutator(sx, g) * tgt).trace();
        const Complex lin_term = (g * tgt).trace();
        const Complex u = -c1 * kI * comm_term + c2 * (Complex(1, 0) - lin_term);
        if (std::abs(u.imag()) > 1e-9) {
            throw NonRealControl("imaginary residue " + std::to_string(u.imag()));
        }
        return u.real();
    };
    // same law in Bloch coordinates: u = c1 (y s_z - z s_y) + c2 (1 - (1 + r.s)/2)
    law.bloch_fn_ = [s, c1, c2](const BlochVector& v) {
        return c1 * (v.y * s.z - v.z * s.y) +
               c2 * (1.0 - 0.5 * (1.0 + v.x * s.x + v.y * s.y + v.z * s.z));
    };
    law.bound_ = c1 + c2;
    law.lipschitz_ = (c1 + c2) * std::sqrt(2.0);
    law.is_zero_ = false;
    return law;
}

struct LipschitzEstimate {
    double estimate = 0.0;  // empirical lower bound on kappa
    bool exceeds_declared = false;
};

// Max of |u(a) - u(b)| / ||a - b||_F over sampled pairs of random states.
inline LipschitzEstimate verify_lipschitz(const ControlLaw& law, int d, int n_samples,
                                          uint64_t seed) {
    if (n_samples < 2) throw EmptyInput("verify_lipschitz: n_samples >= 2 required");
    Rng rng(seed, 0x11b5);
    double best = 0.0;
    for (int i = 0; i < n_samples; ++i) {
        const DensityMatrix a = random_density(rng, d);
        const DensityMatrix b = random_density(rng, d);
        const double dist = (a.matrix() - b.matrix()).norm();
        if (dist < 1e-12) continue;
        const double diff = std::fabs(law.evaluate(a) - law.evaluate(b));
        best = std::max(best, diff / dist);
    }
    LipschitzEstimate out;
    out.estimate = best;
    out.exceeds_declared = !std::isnan(law.lipschitz()) && best > law.lipschitz() + 1e-9;
    return out;
}

} // namespace qmf
