#pragma once

#include <optional>
#include <vector>

namespace flowrecon {

/// Small dense symmetric helpers, hand-rolled on row-major storage. Kept
/// independent of Eigen so the normal-equation solve path and the test
/// oracles do not share an implementation.

/// Cholesky solve of an SPD system A x = b (A n x n row-major). Returns
/// nullopt if a pivot drops below a relative floor (not positive definite).
std::optional<std::vector<double>> cholesky_solve(std::vector<double> a, std::vector<double> b,
                                                  int n);

struct SymmetricEigen {
    std::vector<double> values;  // descending
    std::vector<double> vectors; // row-major n x n, column c = eigenvector of values[c]
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Intended for the
/// small systems used here (rank fallbacks, oracles); O(n^3) per sweep.
SymmetricEigen jacobi_eigh(std::vector<double> a, int n);

/// Minimum-norm solution of the symmetric system A x = b through the
/// eigendecomposition, dropping eigenvalues below rel_tol * max|eigenvalue|.
std::vector<double> symmetric_least_norm_solve(const std::vector<double>& a,
                                               const std::vector<double>& b, int n,
                                               double rel_tol = 1e-12);

} // namespace flowrecon
