#pragma once

namespace ucn {

/// Knobs for the Riemannian conjugate gradient solver. The defaults for
/// the backtracking line search (alpha0, r, c) are the values the method
/// is normally run with.
struct SolverOptions {
  double alpha0 = 1e-3;   // initial step length, reset every outer iteration
  double r = 0.5;         // backtrack shrink factor, in (0, 1)
  double c = 1e-4;        // Armijo sufficient-decrease constant, in (0, 1)
  double grad_tol = 1e-6; // stop when the Riemannian gradient norm drops below
  int max_outer = 500;
  int max_inner = 60;
  bool allow_restart = true;  // fall back to steepest descent on non-descent
                              // conjugate directions
};

}  // namespace ucn
