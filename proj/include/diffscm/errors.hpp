#ifndef DIFFSCM_ERRORS_HPP
#define DIFFSCM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace diffscm {

/// Base class for all library errors so callers can catch everything at once.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define DIFFSCM_DEFINE_ERROR(NAME)                                 \
    struct NAME : Error {                                          \
        explicit NAME(const std::string& msg) : Error(msg) {}      \
    }

// graph
DIFFSCM_DEFINE_ERROR(CycleDetected);
DIFFSCM_DEFINE_ERROR(UnknownNode);
DIFFSCM_DEFINE_ERROR(DuplicateEdge);

// stdyn
DIFFSCM_DEFINE_ERROR(SingularMatrix);
DIFFSCM_DEFINE_ERROR(InvalidAdjacency);
DIFFSCM_DEFINE_ERROR(NotPositiveDefinite);
DIFFSCM_DEFINE_ERROR(DimensionMismatch);
DIFFSCM_DEFINE_ERROR(UnknownBenchmark);
DIFFSCM_DEFINE_ERROR(InvalidSize);
DIFFSCM_DEFINE_ERROR(MissingExogenous);

// fda
DIFFSCM_DEFINE_ERROR(TooFewGridPoints);
DIFFSCM_DEFINE_ERROR(GridMismatch);

// net
DIFFSCM_DEFINE_ERROR(InvalidDim);
DIFFSCM_DEFINE_ERROR(EmptyBatch);
DIFFSCM_DEFINE_ERROR(ShapeMismatch);

// diffusion
DIFFSCM_DEFINE_ERROR(InvalidRange);
DIFFSCM_DEFINE_ERROR(StepOutOfRange);

// scmodel
DIFFSCM_DEFINE_ERROR(MissingNodeData);
DIFFSCM_DEFINE_ERROR(InvalidHyper);
DIFFSCM_DEFINE_ERROR(NotFitted);
DIFFSCM_DEFINE_ERROR(MissingFactualValue);

// eval
DIFFSCM_DEFINE_ERROR(EmptySampleSet);
DIFFSCM_DEFINE_ERROR(LengthMismatch);

// cli / config / io
DIFFSCM_DEFINE_ERROR(ConfigError);
DIFFSCM_DEFINE_ERROR(ParseError);
DIFFSCM_DEFINE_ERROR(IoError);

#undef DIFFSCM_DEFINE_ERROR

} // namespace diffscm

#endif
