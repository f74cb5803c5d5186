#pragma once

#include <complex>

#include <Eigen/Dense>

#include "qmf/errors.hpp"

namespace qmf {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;

inline constexpr Complex kI{0.0, 1.0};

// Default tolerances for state validation. Loose enough to absorb
// accumulated Euler error, tight enough to catch scheme blowups.
namespace tol {
inline constexpr double herm = 1e-9;
inline constexpr double trace = 1e-9;
inline constexpr double psd = 1e-9;
inline constexpr double bloch = 1e-9;
}

inline void require_square(const ComplexMatrix& m, const char* who) {
    if (m.rows() != m.cols() || m.rows() == 0) {
        throw WrongDimension(std::string(who) + ": matrix must be square and non-empty, got " +
                             std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

inline ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) {
    return a * b - b * a;
}

inline ComplexMatrix anticommutator(const ComplexMatrix& a, const ComplexMatrix& b) {
    return a * b + b * a;
}

inline ComplexMatrix hermitize(const ComplexMatrix& m) {
    return 0.5 * (m + m.adjoint());
}

inline double frobenius_norm(const ComplexMatrix& m) { return m.norm(); }

inline double hermiticity_defect(const ComplexMatrix& m) {
    return (m - m.adjoint()).norm();
}

inline bool is_hermitian(const ComplexMatrix& m, double eps = 1e-12) {
    return hermiticity_defect(m) <= eps;
}

// Spectral norm of a Hermitian matrix (largest |eigenvalue|).
inline double operator_norm_hermitian(const ComplexMatrix& m) {
    require_square(m, "operator_norm_hermitian");
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(m, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

inline ComplexMatrix identity(Eigen::Index d) { return ComplexMatrix::Identity(d, d); }

inline ComplexMatrix sigma_x() {
    ComplexMatrix m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

inline ComplexMatrix sigma_y() {
    ComplexMatrix m(2, 2);
    m << Complex(0, 0), Complex(0, -1), Complex(0, 1), Complex(0, 0);
    return m;
}

inline ComplexMatrix sigma_z() {
    ComplexMatrix m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

} // namespace qmf
