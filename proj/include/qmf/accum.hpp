#pragma once

#include <cmath>
#include <cstdint>

#include "qmf/errors.hpp"

namespace qmf {

// Order-independent sum of doubles via fixed-point accumulation in a
// 128-bit integer. Integer addition commutes exactly, so ensemble means
// are bit-identical under any particle permutation or thread partition.
// Inputs must be finite and bounded (|x| <= 8); fine for density-matrix
// entries and Bloch components, which stay within [-1-eps, 1+eps].
class ExactSum {
public:
    void add(double x) {
        if (!std::isfinite(x) || std::fabs(x) >= 8.0) {
            throw NonFinite("ExactSum input out of range: " + std::to_string(x));
        }
        acc_ += static_cast<__int128>(std::llround(x * kScale));
    }

    void combine(const ExactSum& other) { acc_ += other.acc_; }

    double value() const { return static_cast<double>(acc_) / kScale; }

    double mean(int64_t n) const { return value() / static_cast<double>(n); }

    void reset() { acc_ = 0; }

private:
    static constexpr double kScale = 0x1.0p60;
    __int128 acc_ = 0;
};

} // namespace qmf
