#pragma once

#include "eegdec/mat.hpp"

#include <vector>

namespace eegdec {

struct SymEig {
    std::vector<double> values;
    MatD vectors; // column j is the eigenvector of values[j]
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix. O(d^3) per sweep;
// fine for the feature widths the metrics use.
SymEig sym_eig(MatD a, int max_sweeps = 64, double tol = 1e-13);

// Symmetric positive-semidefinite square root via eigendecomposition with
// eigenvalue clipping at zero (the standard numerical hazard around the
// distribution distance).
MatD sym_sqrt_psd(const MatD& a);

} // namespace eegdec
