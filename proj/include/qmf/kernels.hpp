#pragma once

#include <span>
#include <string>
#include <vector>

#include "qmf/complex_matrix.hpp"
#include "qmf/density.hpp"

namespace qmf {

// Pairwise interaction kernel A(l,l';k,k') on X^4, X = {1..d}. Validation
// enforces the two stated conditions: pair-swap symmetry
// A(l,l';k,k') = A(l',l;k',k) and entrywise realness
// A(l,l';k,k') = conj(A(l,l';k,k')). The realness condition is the
// self-adjointness condition taken literally as printed; the built-in
// photon-exchange kernel satisfies both readings.
class InteractionKernel {
public:
    static InteractionKernel validated(int d, std::vector<Complex> values) {
        if (d < 2) throw WrongDimension("InteractionKernel: d >= 2 required");
        const size_t expect = static_cast<size_t>(d) * d * d * d;
        if (values.size() != expect) {
            throw WrongDimension("InteractionKernel: expected " + std::to_string(expect) +
                                 " entries, got " + std::to_string(values.size()));
        }
        InteractionKernel k(d, std::move(values));
        for (int l = 0; l < d; ++l)
            for (int lp = 0; lp < d; ++lp)
                for (int kk = 0; kk < d; ++kk)
                    for (int kp = 0; kp < d; ++kp) {
                        const Complex v = k.at0(l, lp, kk, kp);
                        const Complex sw = k.at0(lp, l, kp, kk);
                        if (std::abs(v - sw) > 1e-12) {
                            throw SymmetryViolated(
                                "A(" + idx_str(l, lp, kk, kp) + ") != A(swapped), " +
                                std::to_string(std::abs(v - sw)));
                        }
                        if (std::abs(v.imag()) > 1e-12) {
                            throw SelfAdjointnessViolated(
                                "A(" + idx_str(l, lp, kk, kp) + ") has imaginary part " +
                                std::to_string(v.imag()));
                        }
                    }
        return k;
    }

    static InteractionKernel zero(int d) {
        return InteractionKernel(d, std::vector<Complex>(static_cast<size_t>(d) * d * d * d));
    }

    // d = 2 kernel with A(2,1;1,2) = A(1,2;2,1) = 1 and zeros otherwise:
    // single-photon exchange between two qubits.
    static InteractionKernel photon_exchange() {
        InteractionKernel k(2, std::vector<Complex>(16));
        k.set0(1, 0, 0, 1, Complex(1, 0));
        k.set0(0, 1, 1, 0, Complex(1, 0));
        return k;
    }

    int local_dim() const { return d_; }

    // 1-based accessor matching the (l, l'; k, k') notation.
    Complex at(int l, int lp, int k, int kp) const { return at0(l - 1, lp - 1, k - 1, kp - 1); }

    bool is_zero() const {
        for (const Complex& v : values_)
            if (v != Complex(0, 0)) return false;
        return true;
    }

    // Matrix of the kernel as an operator on H (x) H, pair index (l-1)*d + (l'-1).
    ComplexMatrix as_pair_matrix() const {
        const int d = d_;
        ComplexMatrix m = ComplexMatrix::Zero(d * d, d * d);
        for (int l = 0; l < d; ++l)
            for (int lp = 0; lp < d; ++lp)
                for (int k = 0; k < d; ++k)
                    for (int kp = 0; kp < d; ++kp) m(l * d + lp, k * d + kp) = at0(l, lp, k, kp);
        return m;
    }

private:
    InteractionKernel(int d, std::vector<Complex> values) : d_(d), values_(std::move(values)) {}

    static std::string idx_str(int l, int lp, int k, int kp) {
        return std::to_string(l + 1) + "," + std::to_string(lp + 1) + ";" +
               std::to_string(k + 1) + "," + std::to_string(kp + 1);
    }

    size_t off(int l, int lp, int k, int kp) const {
        return ((static_cast<size_t>(l) * d_ + lp) * d_ + k) * d_ + kp;
    }
    Complex at0(int l, int lp, int k, int kp) const { return values_[off(l, lp, k, kp)]; }
    void set0(int l, int lp, int k, int kp, Complex v) { values_[off(l, lp, k, kp)] = v; }

    int d_;
    std::vector<Complex> values_;
};

// Mean-field contraction (A^m)(l,l') = sum_{k,k'} A(l,l';k,k') conj(m(k,k')).
// Hermitian whenever the kernel conditions hold and m is Hermitian.
inline ComplexMatrix contract(const InteractionKernel& kernel, const ComplexMatrix& m) {
    const int d = kernel.local_dim();
    if (m.rows() != d || m.cols() != d) {
        throw DimensionMismatch("contract: mean must be " + std::to_string(d) + "x" +
                                std::to_string(d));
    }
    ComplexMatrix out = ComplexMatrix::Zero(d, d);
    for (int l = 1; l <= d; ++l)
        for (int lp = 1; lp <= d; ++lp) {
            Complex acc(0, 0);
            for (int k = 1; k <= d; ++k)
                for (int kp = 1; kp <= d; ++kp)
                    acc += kernel.at(l, lp, k, kp) * std::conj(m(k - 1, kp - 1));
            out(l - 1, lp - 1) = acc;
        }
    return out;
}

inline ComplexMatrix contract(const InteractionKernel& kernel, const DensityMatrix& m) {
    return contract(kernel, m.matrix());
}

// Particle-method Hamiltonian term: the empirical mean of the ensemble
// stands in for m_t.
inline ComplexMatrix mean_field_hamiltonian_term(const InteractionKernel& kernel,
                                                 std::span<const DensityMatrix> states) {
    if (states.empty()) throw EmptyEnsemble("mean_field_hamiltonian_term: no states");
    ComplexMatrix mean = ComplexMatrix::Zero(states[0].dim(), states[0].dim());
    for (const DensityMatrix& s : states) mean += s.matrix();
    mean /= static_cast<double>(states.size());
    return contract(kernel, mean);
}

} // namespace qmf
