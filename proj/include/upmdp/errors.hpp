#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace upmdp {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Problems with model data: files, schemas, expressions, probability rows.
struct ModelError : Error {
    using Error::Error;
};

/// Failures of numerical procedures: non-convergence, infeasibility, bad inputs.
struct NumericError : Error {
    using Error::Error;
};

struct ParseError : ModelError {
    std::size_t offset;
    std::string expected;
    ParseError(std::size_t offset_, std::string expected_)
        : ModelError("parse error at offset " + std::to_string(offset_) + ": expected " + expected_),
          offset(offset_), expected(std::move(expected_)) {}
};

struct SchemaError : ModelError {
    std::string field;
    explicit SchemaError(std::string field_, const std::string& detail = "")
        : ModelError("schema error in field '" + field_ + "'" + (detail.empty() ? "" : ": " + detail)),
          field(std::move(field_)) {}
};

struct UnknownParameterError : ModelError {
    std::string name;
    explicit UnknownParameterError(std::string name_, const std::string& where = "")
        : ModelError("unknown parameter '" + name_ + "'" + (where.empty() ? "" : " in " + where)),
          name(std::move(name_)) {}
};

struct UnboundParameterError : ModelError {
    std::string name;
    explicit UnboundParameterError(std::string name_)
        : ModelError("parameter '" + name_ + "' has no bound value"), name(std::move(name_)) {}
};

struct DivisionByZeroError : ModelError {
    DivisionByZeroError() : ModelError("division by zero while evaluating expression") {}
};

struct NormalizationError : ModelError {
    int state;
    int action;
    double sum;
    long sample_index;  // -1 when the failure is not tied to a scenario
    NormalizationError(int state_, int action_, double sum_, const std::string& state_name,
                       const std::string& action_name, long sample_index_ = -1)
        : ModelError("transition row (" + state_name + ", " + action_name + ") does not normalize: sum = " +
                     std::to_string(sum_) +
                     (sample_index_ >= 0 ? " (sample " + std::to_string(sample_index_) + ")" : "")),
          state(state_), action(action_), sum(sum_), sample_index(sample_index_) {}
};

struct InvalidGridError : ModelError {
    using ModelError::ModelError;
};

struct NonConvergenceError : NumericError {
    explicit NonConvergenceError(std::uint64_t iterations)
        : NumericError("value iteration failed to converge within " + std::to_string(iterations) +
                       " iterations") {}
};

struct InvalidDiscountError : NumericError {
    InvalidDiscountError() : NumericError("operation requires a discount factor strictly below 1") {}
};

struct TargetOutOfRangeError : NumericError {
    double target, lo, hi;
    TargetOutOfRangeError(double target_, double lo_, double hi_)
        : NumericError("target value " + std::to_string(target_) + " lies outside [" +
                       std::to_string(lo_) + ", " + std::to_string(hi_) + "]"),
          target(target_), lo(lo_), hi(hi_) {}
};

struct PolicySpaceTooLargeError : NumericError {
    std::uint64_t count, cap;
    PolicySpaceTooLargeError(std::uint64_t count_, std::uint64_t cap_)
        : NumericError("deterministic policy space has " + std::to_string(count_) +
                       " members, above the cap " + std::to_string(cap_)),
          count(count_), cap(cap_) {}
};

struct InfeasibleIntervalsError : NumericError {
    int state, action;
    InfeasibleIntervalsError(int state_, int action_)
        : NumericError("interval row at state " + std::to_string(state_) + ", action " +
                       std::to_string(action_) + " admits no probability distribution"),
          state(state_), action(action_) {}
};

struct NoSignChangeError : NumericError {
    using NumericError::NumericError;
};

struct InvalidInputError : NumericError {
    using NumericError::NumericError;
};

struct EmptyInputError : NumericError {
    using NumericError::NumericError;
};

}  // namespace upmdp
