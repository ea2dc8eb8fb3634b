#pragma once

#include <stdexcept>
#include <string>

namespace martsel {

/// Base class for all failures raised by the library.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A query point lies outside the set it was asked about.
class NotMemberError : public Error {
  public:
    explicit NotMemberError(const std::string& what) : Error(what) {}
};

/// An operation that needs a nonempty set received an empty one.
class EmptySetError : public Error {
  public:
    explicit EmptySetError(const std::string& what) : Error(what) {}
};

/// A cone-only operation received a set that is not a cone.
class NotAConeError : public Error {
  public:
    explicit NotAConeError(const std::string& what) : Error(what) {}
};

/// Dimension or tree-shape mismatch between arguments.
class MismatchError : public Error {
  public:
    explicit MismatchError(const std::string& what) : Error(what) {}
};

/// Malformed input data (files, trees, flags, masses).
class InputError : public Error {
  public:
    explicit InputError(const std::string& what) : Error(what) {}
};

/// A conditional expectation was requested at a node of measure zero.
class ZeroMassError : public Error {
  public:
    explicit ZeroMassError(const std::string& what) : Error(what) {}
};

/// A user-supplied start point is not admissible at the root.
class InvalidStartError : public Error {
  public:
    explicit InvalidStartError(const std::string& what) : Error(what) {}
};

/// A market model violates one of its standing assumptions.
class AssumptionViolated : public Error {
  public:
    AssumptionViolated(const std::string& which, const std::string& where)
        : Error("assumption violated: " + which + " at " + where) {}
};

/// A cost function is invalid (for example S(0) != 0).
class InvalidCostError : public Error {
  public:
    explicit InvalidCostError(const std::string& what) : Error(what) {}
};

/// A separating vector handed to the decomposition step does not lie in the
/// polar cone the step requires, so no valid split can exist.
class NotInPolarError : public Error {
  public:
    explicit NotInPolarError(const std::string& what) : Error(what) {}
};

/// A trading strategy violates its admissibility constraints (holdings
/// outside the constraint cone, or a missing terminal liquidation).
class InadmissibleError : public Error {
  public:
    explicit InadmissibleError(const std::string& what) : Error(what) {}
};

/// Solution construction was asked for on an unsolvable instance.
class UnsolvableError : public Error {
  public:
    explicit UnsolvableError(const std::string& what) : Error(what) {}
};

/// Input exceeds a deliberate size cap (brute-force oracle guards).
class UnsupportedError : public Error {
  public:
    explicit UnsupportedError(const std::string& what) : Error(what) {}
};

/// Internal consistency failure: an invariant the construction relies on
/// (face-constancy of membership, convexity of flagged unions) was observed
/// to fail. Never downgraded to a wrong answer.
class HardError : public Error {
  public:
    explicit HardError(const std::string& what) : Error(what) {}
};

}  // namespace martsel
