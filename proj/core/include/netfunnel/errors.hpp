#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace netfunnel {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// --- graph ------------------------------------------------------------

struct DisconnectedGraph : Error {
    using Error::Error;
};
struct LoopDetected : Error {
    using Error::Error;
};
struct EmptyEdgeSet : Error {
    using Error::Error;
};
struct DimensionMismatch : Error {
    using Error::Error;
};

// --- expression language ----------------------------------------------

/// Parse failure; `position` is a byte offset into the source text.
struct ParseError : Error {
    ParseError(std::size_t position, const std::string& message)
        : Error("parse error at offset " + std::to_string(position) + ": " + message),
          position(position) {}
    std::size_t position;
};
struct UnboundVariable : Error {
    explicit UnboundVariable(const std::string& name)
        : Error("unbound variable: " + name), name(name) {}
    std::string name;
};
/// Evaluation produced NaN or Inf; carries the offending subexpression.
struct NonFiniteResult : Error {
    explicit NonFiniteResult(const std::string& subexpr)
        : Error("non-finite result in subexpression: " + subexpr), subexpr(subexpr) {}
    std::string subexpr;
};

// --- funnel -----------------------------------------------------------

struct EvaluatedBeforeActivation : Error {
    using Error::Error;
};
/// |ratio| >= 1: the output difference left (or touched) the funnel.
struct RatioOutOfFunnel : Error {
    explicit RatioOutOfFunnel(double ratio)
        : Error("coupling ratio out of funnel: s = " + std::to_string(ratio)), ratio(ratio) {}
    double ratio;
};

// --- dynamics ---------------------------------------------------------

struct SingularGain : Error {
    using Error::Error;
};
struct DisconnectedComponent : Error {
    using Error::Error;
};
struct HeterogeneousInternalDynamics : Error {
    using Error::Error;
};

// --- sim ---------------------------------------------------------------

struct InitialConditionOutsideFunnel : Error {
    InitialConditionOutsideFunnel(double t, int i, int j, int p)
        : Error("initial condition outside funnel at t = " + std::to_string(t) + " on edge " +
                std::to_string(i) + "-" + std::to_string(j) + " component " + std::to_string(p)),
          t(t), i(i), j(j), p(p) {}
    double t;
    int i, j, p;
};
struct FunnelBreach : Error {
    FunnelBreach(double t, int i, int j, int p)
        : Error("funnel breach at t = " + std::to_string(t) + " on edge " + std::to_string(i) +
                "-" + std::to_string(j) + " component " + std::to_string(p)),
          t(t), i(i), j(j), p(p) {}
    double t;
    int i, j, p;
};
struct FiniteEscapeSuspected : Error {
    explicit FiniteEscapeSuspected(double t)
        : Error("state norm blow-up at t = " + std::to_string(t) + "; finite escape suspected"),
          t(t) {}
    double t;
};
struct StepUnderflow : Error {
    explicit StepUnderflow(double t)
        : Error("step size underflow at t = " + std::to_string(t)), t(t) {}
    double t;
};
struct UnknownNode : Error {
    explicit UnknownNode(int id) : Error("unknown node: " + std::to_string(id)), id(id) {}
    int id;
};
struct DuplicateJoin : Error {
    explicit DuplicateJoin(int id)
        : Error("join of already active node: " + std::to_string(id)), id(id) {}
    int id;
};

// --- analysis / io ------------------------------------------------------

struct SchemaMismatch : Error {
    using Error::Error;
};
struct ConventionMismatch : Error {
    using Error::Error;
};
struct HypothesisViolated : Error {
    using Error::Error;
};
struct NonMonotoneInput : Error {
    using Error::Error;
};

}  // namespace netfunnel
