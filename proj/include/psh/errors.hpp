#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace psh {

/// Root of every numerical failure raised by the library.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The right-eigenvector matrix is too ill-conditioned to trust a diagonalization.
class NearDefective : public NumericError {
public:
    NearDefective(double condition, const std::string& what)
        : NumericError(what), condition_(condition) {}
    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

/// Raised by biorthonormalization when a cluster of equal eigenvalues cannot be resolved.
class DegenerateCluster : public NumericError {
public:
    DegenerateCluster(std::vector<int> members, const std::string& what)
        : NumericError(what), members_(std::move(members)) {}
    const std::vector<int>& members() const noexcept { return members_; }

private:
    std::vector<int> members_;
};

class AtExceptionalPoint : public NumericError {
public:
    AtExceptionalPoint(double condition, const std::string& what)
        : NumericError(what), condition_(condition) {}
    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

class IndexIllDefined : public NumericError {
public:
    IndexIllDefined(double indicator, const std::string& what)
        : NumericError(what), indicator_(indicator) {}
    double indicator() const noexcept { return indicator_; }

private:
    double indicator_;
};

class NoEPInBracket : public NumericError {
public:
    using NumericError::NumericError;
};

class NoEP3InBox : public NumericError {
public:
    using NumericError::NumericError;
};

class AccidentallyZeroElement : public NumericError {
public:
    AccidentallyZeroElement(double magnitude, const std::string& what)
        : NumericError(what), magnitude_(magnitude) {}
    double magnitude() const noexcept { return magnitude_; }

private:
    double magnitude_;
};

/// Bisection ran out of iterations; carries the last bracket.
class BracketNotConverged : public NumericError {
public:
    BracketNotConverged(double lo, double hi, const std::string& what)
        : NumericError(what), lo_(lo), hi_(hi) {}
    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }

private:
    double lo_;
    double hi_;
};

/// Problem size beyond what dense enumeration supports.
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace psh
