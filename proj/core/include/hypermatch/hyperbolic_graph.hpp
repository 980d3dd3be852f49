#pragma once

// Poincaré-ball operations composed from autodiff primitives. Each function
// works on a batch of points stored as the rows of a rank-2 Var and evaluates
// in the same order as its counterpart in hypermatch::kernels.

#include "hypermatch/autodiff.hpp"

namespace hypermatch::autodiff {

/// Row-wise x (+)_c y for equally shaped batches.
Var mobius_add_rows(Var x, Var y, double c);
/// Row-wise exponential map at the origin.
Var exp0_rows(Var v, double c);
/// Row-wise logarithmic map at the origin.
Var log0_rows(Var y, double c);
/// Row-wise Möbius matrix-vector product: row r of the result is
/// W^T (x)_c x_r, with w of shape [d_in, d_out].
Var mobius_matvec_rows(Var x, Var w, double c);
/// Row-wise distance d_c(x_r, y_r); c = 0 gives 2|x_r - y_r|.
Var distance_rows(Var x, Var y, double c);
Var to_klein_rows(Var x, double c);
Var from_klein_rows(Var k, double c);
/// Einstein midpoint of all rows, as a [1, d] ball point.
Var einstein_midpoint(Var points, double c);

}  // namespace hypermatch::autodiff
