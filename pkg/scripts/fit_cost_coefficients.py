#!/usr/bin/env python3
"""Recompute the default cost-model coefficients from the reference
measurements and print the per-point fit quality.

The constrained least-squares fit lands on the linear boundary (quad = 0):
the reference prefill latencies are concave in context length, so no
quadratic-plus-linear curve through the origin reproduces all three points
within 10% (the middle point misses by ~19%). Run this to see the numbers.
"""

import numpy as np

from parallel_icl.backends.cost import REFERENCE_PREFILL_POINTS, fit_prefill_coefficients


def main():
    quad, linear = fit_prefill_coefficients(REFERENCE_PREFILL_POINTS)
    print(f"fitted coefficients: prefill_quad = {quad:.6e}, prefill_linear = {linear:.6e}")
    print(f"{'tokens':>10} {'measured':>10} {'fitted':>10} {'rel err':>9}")
    for length, measured in REFERENCE_PREFILL_POINTS:
        fitted = quad * length**2 + linear * length
        print(f"{length:>10} {measured:>10.3f} {fitted:>10.3f} {(fitted - measured) / measured:>+9.1%}")

    lengths = np.array([p[0] for p in REFERENCE_PREFILL_POINTS], dtype=float)
    measured = np.array([p[1] for p in REFERENCE_PREFILL_POINTS])
    design = np.stack([lengths**2, lengths], axis=1)
    unconstrained, *_ = np.linalg.lstsq(design, measured, rcond=None)
    print(
        f"\nunconstrained least squares would give quad = {unconstrained[0]:.3e} "
        f"(negative: the measured curve is concave), which the cost model rejects"
    )


if __name__ == "__main__":
    main()
