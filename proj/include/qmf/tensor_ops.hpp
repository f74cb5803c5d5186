#pragma once

#include <cstdint>

#include "qmf/complex_matrix.hpp"

namespace qmf {

// Tensor-slot indexing for n particles of local dimension d on a D = d^n
// space. Particle 1 is the slowest-varying index: a basis index i decomposes
// as i = sum_j i_j * d^(n-j). Public particle indices are 1-based.
struct TensorLayout {
    int n;
    int d;
    Eigen::Index dim;

    TensorLayout(int n_particles, int local_dim) : n(n_particles), d(local_dim) {
        if (n < 1 || d < 2) throw WrongDimension("TensorLayout: need n >= 1, d >= 2");
        dim = 1;
        for (int i = 0; i < n; ++i) {
            dim *= d;
            if (dim > (Eigen::Index(1) << 40)) throw WrongDimension("TensorLayout: d^n overflow");
        }
    }

    Eigen::Index stride(int j) const { // 1-based slot
        check_slot(j);
        Eigen::Index s = 1;
        for (int i = 0; i < n - j; ++i) s *= d;
        return s;
    }

    void check_slot(int j) const {
        if (j < 1 || j > n) {
            throw IndexOutOfRange("particle index " + std::to_string(j) + " not in [1, " +
                                  std::to_string(n) + "]");
        }
    }
};

namespace detail {

inline void check_local_op(const ComplexMatrix& b, const TensorLayout& lay, const char* who) {
    if (b.rows() != lay.d || b.cols() != lay.d) {
        throw WrongDimension(std::string(who) + ": local operator must be " +
                             std::to_string(lay.d) + "x" + std::to_string(lay.d));
    }
}

inline void check_state(const ComplexMatrix& rho, const TensorLayout& lay, const char* who) {
    if (rho.rows() != lay.dim || rho.cols() != lay.dim) {
        throw WrongDimension(std::string(who) + ": state must be " + std::to_string(lay.dim) +
                             "x" + std::to_string(lay.dim));
    }
}

} // namespace detail

// out (+)= B_j * rho, index-striding over the j-th tensor slot; never
// materializes the d^n x d^n embedding.
inline void apply_local_left(const ComplexMatrix& b, int j, const TensorLayout& lay,
                             const ComplexMatrix& rho, ComplexMatrix& out,
                             bool accumulate = false) {
    detail::check_local_op(b, lay, "apply_local_left");
    detail::check_state(rho, lay, "apply_local_left");
    const Eigen::Index D = lay.dim, s = lay.stride(j), d = lay.d;
    const Eigen::Index block = d * s;
    out.resize(D, D);
    for (Eigen::Index c = 0; c < D; ++c) {
        const Complex* in = rho.data() + c * D;
        Complex* o = out.data() + c * D;
        for (Eigen::Index base = 0; base < D; base += block) {
            for (Eigen::Index a = 0; a < d; ++a) {
                Complex* orow = o + base + a * s;
                const Complex ba0 = b(a, 0);
                const Complex* i0 = in + base;
                if (accumulate) {
                    for (Eigen::Index lo = 0; lo < s; ++lo) orow[lo] += ba0 * i0[lo];
                } else {
                    for (Eigen::Index lo = 0; lo < s; ++lo) orow[lo] = ba0 * i0[lo];
                }
                for (Eigen::Index bb = 1; bb < d; ++bb) {
                    const Complex bab = b(a, bb);
                    const Complex* ib = in + base + bb * s;
                    for (Eigen::Index lo = 0; lo < s; ++lo) orow[lo] += bab * ib[lo];
                }
            }
        }
    }
}

// out (+)= rho * B_j
inline void apply_local_right(const ComplexMatrix& b, int j, const TensorLayout& lay,
                              const ComplexMatrix& rho, ComplexMatrix& out,
                              bool accumulate = false) {
    detail::check_local_op(b, lay, "apply_local_right");
    detail::check_state(rho, lay, "apply_local_right");
    const Eigen::Index D = lay.dim, s = lay.stride(j), d = lay.d;
    out.resize(D, D);
    for (Eigen::Index c = 0; c < D; ++c) {
        const Eigen::Index a = (c / s) % d;
        const Eigen::Index cbase = c - a * s;
        auto ocol = out.col(c);
        if (accumulate) {
            for (Eigen::Index bb = 0; bb < d; ++bb) ocol += b(bb, a) * rho.col(cbase + bb * s);
        } else {
            ocol = b(0, a) * rho.col(cbase);
            for (Eigen::Index bb = 1; bb < d; ++bb) ocol += b(bb, a) * rho.col(cbase + bb * s);
        }
    }
}

// out = B_j * rho * B_j^dag
inline void apply_local_sandwich(const ComplexMatrix& b, int j, const TensorLayout& lay,
                                 const ComplexMatrix& rho, ComplexMatrix& out,
                                 ComplexMatrix& scratch) {
    apply_local_left(b, j, lay, rho, scratch);
    const ComplexMatrix bdag = b.adjoint();
    apply_local_right(bdag, j, lay, scratch, out);
}

// out (+)= O_jk * rho where O is a d^2 x d^2 operator on the (j, k) pair of
// tensor slots; slot j indexes the first factor of the pair.
inline void apply_pair_left(const ComplexMatrix& op, int j, int k, const TensorLayout& lay,
                            const ComplexMatrix& rho, ComplexMatrix& out,
                            bool accumulate = false) {
    if (j == k) throw DuplicateIndex("apply_pair_left: j == k == " + std::to_string(j));
    lay.check_slot(j);
    lay.check_slot(k);
    detail::check_state(rho, lay, "apply_pair_left");
    const Eigen::Index d = lay.d;
    if (op.rows() != d * d || op.cols() != d * d) {
        throw WrongDimension("apply_pair_left: pair operator must be d^2 x d^2");
    }
    const Eigen::Index D = lay.dim, sj = lay.stride(j), sk = lay.stride(k);
    out.resize(D, D);
    if (!accumulate) out.setZero();
    for (Eigen::Index c = 0; c < D; ++c) {
        const Complex* in = rho.data() + c * D;
        Complex* o = out.data() + c * D;
        for (Eigen::Index r = 0; r < D; ++r) {
            const Eigen::Index a1 = (r / sj) % d;
            const Eigen::Index a2 = (r / sk) % d;
            const Eigen::Index base = r - a1 * sj - a2 * sk;
            Complex acc(0, 0);
            const Eigen::Index arow = a1 * d + a2;
            for (Eigen::Index b1 = 0; b1 < d; ++b1) {
                for (Eigen::Index b2 = 0; b2 < d; ++b2) {
                    const Complex w = op(arow, b1 * d + b2);
                    if (w != Complex(0, 0)) acc += w * in[base + b1 * sj + b2 * sk];
                }
            }
            o[r] += acc;
        }
    }
}

// Marginal of the kept particle: rho_keep(a, b) = sum_rest rho(a:rest, b:rest).
inline ComplexMatrix partial_trace_raw(const ComplexMatrix& rho, const TensorLayout& lay,
                                       int keep) {
    lay.check_slot(keep);
    detail::check_state(rho, lay, "partial_trace");
    const Eigen::Index d = lay.d, s = lay.stride(keep), D = lay.dim;
    const Eigen::Index block = d * s;
    ComplexMatrix out = ComplexMatrix::Zero(d, d);
    for (Eigen::Index a = 0; a < d; ++a) {
        for (Eigen::Index b = 0; b < d; ++b) {
            Complex acc(0, 0);
            for (Eigen::Index hi = 0; hi < D; hi += block) {
                const Complex* col0 = rho.data();
                for (Eigen::Index lo = 0; lo < s; ++lo) {
                    const Eigen::Index row = hi + a * s + lo;
                    const Eigen::Index col = hi + b * s + lo;
                    acc += col0[col * D + row];
                }
            }
            out(a, b) = acc;
        }
    }
    return out;
}

inline DensityMatrix partial_trace(const NState& state, int keep) {
    const TensorLayout lay(state.n_particles, state.local_dim);
    return DensityMatrix::unchecked(
        partial_trace_raw(state.inner.matrix(), lay, keep));
}

// tr(L_j rho) for a local operator L on slot j.
inline Complex expect_local(const ComplexMatrix& l, int j, const TensorLayout& lay,
                            const ComplexMatrix& rho) {
    const ComplexMatrix marg = partial_trace_raw(rho, lay, j);
    return (l * marg).trace();
}

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline ComplexMatrix tensor_power(const ComplexMatrix& a, int n) {
    if (n < 1) throw WrongDimension("tensor_power: n >= 1 required");
    ComplexMatrix out = a;
    for (int i = 1; i < n; ++i) out = kron(out, a);
    return out;
}

inline NState product_state(const DensityMatrix& rho0, int n) {
    return NState{n, static_cast<int>(rho0.dim()),
                  DensityMatrix::unchecked(tensor_power(rho0.matrix(), n))};
}

} // namespace qmf
