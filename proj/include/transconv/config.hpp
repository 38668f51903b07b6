#pragma once

#include <cstdlib>
#include <string>
#include <thread>

namespace transconv {

/// Numerical tolerances used across the library. Defaults are chosen for
/// dense double-precision work at ambient dimension n <= 8; every floor is
/// configurable because the underlying theory only assumes strict positivity.
struct Tolerances {
    double det_floor = 1e-10;          ///< below this, a frame concatenation counts as singular
    double gamma3_floor = 1e-8;        ///< facet pairs with smaller pair-Gramian are flagged, not integrated
    double frame_orthonormality = 1e-12;
    double dual_identity = 1e-10;      ///< residual allowed in V^T W = id
    double rank_rel = 1e-10;           ///< relative singular-value cutoff for rank decisions
    double lp_feasibility = 1e-9;      ///< slack for polytope feasibility checks
    double clip = 1e-9;                ///< geometric slack when clipping fiber polytopes
    double facet_degeneracy = 1e-14;   ///< minimal simplex volume
    double continuity = 1e-9;          ///< cell-to-cell agreement of piecewise-linear maps
    double quadrature_convergence = 1e-2;  ///< relative L vs L+1 disagreement allowed
    double verify = 1e-2;              ///< inequalities pass when lhs <= rhs * (1 + verify)
};

inline const Tolerances& default_tolerances() {
    static const Tolerances tol{};
    return tol;
}

/// Worker budget for the parallel sweeps. Resolution order: explicit value,
/// TRANSCONV_THREADS environment variable, then 1 (fully sequential).
inline int resolve_thread_count(int requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("TRANSCONV_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

}  // namespace transconv
