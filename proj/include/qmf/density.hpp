#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "qmf/complex_matrix.hpp"
#include "qmf/rng.hpp"

namespace qmf {

// Hermitian, PSD, trace-one matrix. Construct through validate_density()
// (checked) or DensityMatrix::unchecked() on hot paths that maintain the
// invariants themselves.
class DensityMatrix {
public:
    static DensityMatrix unchecked(ComplexMatrix m) { return DensityMatrix(std::move(m)); }

    const ComplexMatrix& matrix() const { return m_; }
    Eigen::Index dim() const { return m_.rows(); }

private:
    explicit DensityMatrix(ComplexMatrix m) : m_(std::move(m)) {}
    ComplexMatrix m_;

    friend DensityMatrix validate_density(const ComplexMatrix&, double);
};

inline DensityMatrix validate_density(const ComplexMatrix& m, double tolerance = tol::herm) {
    require_square(m, "validate_density");
    const double herm_defect = hermiticity_defect(m);
    if (herm_defect > tolerance) {
        throw NotHermitian("||rho - rho^dag||_F = " + std::to_string(herm_defect) +
                           " exceeds " + std::to_string(tolerance));
    }
    const Complex tr = m.trace();
    const double trace_defect = std::abs(tr - Complex(1.0, 0.0));
    if (trace_defect > tolerance) {
        throw NotTraceOne("|tr(rho) - 1| = " + std::to_string(trace_defect) +
                          " exceeds " + std::to_string(tolerance));
    }
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitize(m), Eigen::EigenvaluesOnly);
    const double min_eig = es.eigenvalues().minCoeff();
    if (min_eig < -tolerance) {
        throw NotPSD("min eigenvalue " + std::to_string(min_eig) + " below -" +
                     std::to_string(tolerance));
    }
    return DensityMatrix::unchecked(m);
}

// Joint state of n particles with local dimension d; inner matrix is d^n x d^n.
struct NState {
    int n_particles;
    int local_dim;
    DensityMatrix inner;

    static NState validated(int n_particles, int local_dim, const ComplexMatrix& m,
                            double tolerance = tol::herm) {
        if (n_particles < 1 || local_dim < 2) {
            throw WrongDimension("NState: need n_particles >= 1 and local_dim >= 2");
        }
        Eigen::Index expect = 1;
        for (int i = 0; i < n_particles; ++i) expect *= local_dim;
        if (m.rows() != expect) {
            throw WrongDimension("NState: matrix dim " + std::to_string(m.rows()) +
                                 " != local_dim^n = " + std::to_string(expect));
        }
        return NState{n_particles, local_dim, validate_density(m, tolerance)};
    }
};

struct BlochVector {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double norm() const { return std::sqrt(x * x + y * y + z * z); }

    BlochVector& operator+=(const BlochVector& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    friend BlochVector operator+(BlochVector a, const BlochVector& b) { return a += b; }
    friend BlochVector operator*(double s, const BlochVector& v) {
        return {s * v.x, s * v.y, s * v.z};
    }
};

inline BlochVector bloch_decompose(const DensityMatrix& rho) {
    if (rho.dim() != 2) {
        throw WrongDimension("bloch_decompose: expected a qubit state, dim = " +
                             std::to_string(rho.dim()));
    }
    const ComplexMatrix& m = rho.matrix();
    return {2.0 * m(0, 1).real(), -2.0 * m(0, 1).imag(), (m(0, 0) - m(1, 1)).real()};
}

inline DensityMatrix bloch_compose(const BlochVector& v) {
    const double n = v.norm();
    if (n > 1.0 + tol::bloch) {
        throw BlochNormExceeded("||v|| = " + std::to_string(n));
    }
    ComplexMatrix m(2, 2);
    m(0, 0) = Complex(0.5 * (1.0 + v.z), 0.0);
    m(1, 1) = Complex(0.5 * (1.0 - v.z), 0.0);
    m(0, 1) = Complex(0.5 * v.x, -0.5 * v.y);
    m(1, 0) = Complex(0.5 * v.x, 0.5 * v.y);
    return DensityMatrix::unchecked(std::move(m));
}

// ground/excited z-eigenstates
inline DensityMatrix rho_g() { return bloch_compose({0, 0, 1}); }
inline DensityMatrix rho_e() { return bloch_compose({0, 0, -1}); }
inline DensityMatrix maximally_mixed(Eigen::Index d) {
    return DensityMatrix::unchecked(ComplexMatrix::Identity(d, d) / static_cast<double>(d));
}

// Hermitian square root with negative eigenvalues clipped to zero, so a
// slightly-off-PSD numerical state still has a usable root.
inline ComplexMatrix sqrtm_psd(const ComplexMatrix& m) {
    require_square(m, "sqrtm_psd");
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitize(m));
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

inline double purity(const ComplexMatrix& m) { return (m * m).trace().real(); }
inline double purity(const DensityMatrix& rho) { return purity(rho.matrix()); }

// Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, in [0, 1].
inline double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
    if (rho.dim() != sigma.dim()) {
        throw DimensionMismatch("fidelity: " + std::to_string(rho.dim()) + " vs " +
                                std::to_string(sigma.dim()));
    }
    const ComplexMatrix root = sqrtm_psd(rho.matrix());
    const ComplexMatrix inner = root * sigma.matrix() * root;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitize(inner), Eigen::EigenvaluesOnly);
    const double s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    return std::min(1.0, s * s);
}

// --- random states (Hilbert-Schmidt measure) ---

inline ComplexMatrix random_ginibre(Rng& rng, Eigen::Index d) {
    ComplexMatrix g(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) g(i, j) = Complex(rng.normal(), rng.normal());
    return g;
}

inline DensityMatrix random_density(Rng& rng, Eigen::Index d) {
    const ComplexMatrix g = random_ginibre(rng, d);
    ComplexMatrix rho = g * g.adjoint();
    rho /= rho.trace().real();
    return DensityMatrix::unchecked(hermitize(rho));
}

inline DensityMatrix random_pure(Rng& rng, Eigen::Index d) {
    Eigen::VectorXcd psi(d);
    for (Eigen::Index i = 0; i < d; ++i) psi(i) = Complex(rng.normal(), rng.normal());
    psi.normalize();
    return DensityMatrix::unchecked(psi * psi.adjoint());
}

// Random Hermitian matrix rescaled to a spectral norm drawn from [lo, hi].
inline ComplexMatrix random_hermitian(Rng& rng, Eigen::Index d, double lo = 0.1,
                                      double hi = 10.0) {
    ComplexMatrix h = hermitize(random_ginibre(rng, d));
    const double current = operator_norm_hermitian(h);
    const double target = rng.uniform(lo, hi);
    if (current > 0) h *= target / current;
    return h;
}

} // namespace qmf
