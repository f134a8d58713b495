#pragma once

namespace deteval {

/// Regularized lower incomplete gamma P(a, x) for a > 0, x >= 0.
/// Series expansion below x = a + 1, continued fraction above.
double regularized_gamma_p(double a, double x);

}  // namespace deteval
