#pragma once

#include <stdexcept>
#include <string>

namespace qmf {

// Base class for all library errors. `code()` returns a stable machine-readable
// tag (e.g. "NotHermitian"); `what()` carries the human-readable detail.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define QMF_DEFINE_ERROR(NAME)                                 \
    class NAME : public Error {                                \
    public:                                                    \
        explicit NAME(const std::string& message)              \
            : Error(#NAME, message) {}                         \
    }

// quantum-core
QMF_DEFINE_ERROR(NotHermitian);
QMF_DEFINE_ERROR(NotTraceOne);
QMF_DEFINE_ERROR(NotPSD);
QMF_DEFINE_ERROR(IndexOutOfRange);
QMF_DEFINE_ERROR(DuplicateIndex);
QMF_DEFINE_ERROR(WrongDimension);
QMF_DEFINE_ERROR(BlochNormExceeded);
QMF_DEFINE_ERROR(DimensionMismatch);

// kernels
QMF_DEFINE_ERROR(SymmetryViolated);
QMF_DEFINE_ERROR(SelfAdjointnessViolated);
QMF_DEFINE_ERROR(EmptyEnsemble);

// sde-engine
QMF_DEFINE_ERROR(NonFinite);
QMF_DEFINE_ERROR(ProjectionFailed);
QMF_DEFINE_ERROR(DegenerateState);
QMF_DEFINE_ERROR(EfficiencyOutOfRange);
QMF_DEFINE_ERROR(GridInvalid);

// models
QMF_DEFINE_ERROR(TooManyParticles);
QMF_DEFINE_ERROR(MissingKernel);
QMF_DEFINE_ERROR(MissingMeanSource);
QMF_DEFINE_ERROR(UnsupportedKernel);

// meanfield-solver
QMF_DEFINE_ERROR(ZeroDistance);
QMF_DEFINE_ERROR(LockstepViolated);

// control
QMF_DEFINE_ERROR(NonRealControl);

// diagnostics
QMF_DEFINE_ERROR(EtaNotOne);
QMF_DEFINE_ERROR(EmptyInput);

// cli
QMF_DEFINE_ERROR(ConfigInvalid);
QMF_DEFINE_ERROR(ExperimentFailed);

#undef QMF_DEFINE_ERROR

} // namespace qmf
