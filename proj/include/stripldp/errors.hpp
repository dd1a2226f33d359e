#pragma once

#include <stdexcept>
#include <string>

namespace stripldp {

// Malformed input: bad matrices, failed ellipticity, bad JSON, bad options.
class SpecError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Any numerical failure (supercritical λ, no convergence, failed bisection).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SupercriticalError : public NumericalError {
public:
    SupercriticalError(const std::string& what, int level, double lambda)
        : NumericalError(what), level_(level), lambda_(lambda) {}
    int level() const { return level_; }
    double lambda() const { return lambda_; }

private:
    int level_;
    double lambda_;
};

class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, double residual)
        : NumericalError(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

// A walk left its window or ran past its step budget.
class BudgetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace stripldp
