#pragma once

#include <span>
#include <string>

#include "smpc/linear_system.hpp"

namespace smpc {

enum class FactorKind { cantelli, gaussian };

std::string to_string(FactorKind k);
FactorKind factor_kind_from_string(const std::string& s);

// Distribution-free one-sided tail factor sqrt((1-p)/p).
double cantelli_factor(double p);

// Standard-normal quantile N^{-1}(1-p), by bisection on the CDF.
double gaussian_factor(double p);

double tightening_factor(FactorKind kind, double p);

// bound - sqrt(d^T Cov d) * f(p). The deterministic surrogate constraint is
// direction^T mean <= returned margin.
double tightened_bound(const ChanceConstraint& c, const Matrix& cov, FactorKind kind);

// (1 - alpha/2) * bound - (d^T Cov d) f(p)^2 / (2 alpha bound), the linear-in-Cov
// surrogate; always at most tightened_bound.
double linearized_tightened_bound(const ChanceConstraint& c, const Matrix& cov, FactorKind kind,
                                  double alpha);

// Fraction of samples violating direction^T z >= bound.
double empirical_violation(std::span<const Vector> samples, const ChanceConstraint& c);

}  // namespace smpc
