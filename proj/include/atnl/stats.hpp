#pragma once

#include <span>

namespace atnl {

// Regularized lower incomplete gamma P(a, x) via series / continued
// fraction (Numerical Recipes style).
double gamma_p(double a, double x);

// Survival function of the chi-square distribution with dof degrees of
// freedom: P(X > stat).
double chi_square_sf(double stat, int dof);

// Pearson chi-square statistic of observed counts against expected counts.
double chi_square_stat(std::span<const double> observed, std::span<const double> expected);

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> xs, std::span<const double> ys);

} // namespace atnl
