"""
Kernel smoothing baseline
=========================

The classical estimator smooths sine and cosine separately and takes the
angle of the result.  It needs no model for the wraps, but it blurs the
jumps that the mixture handles directly.
"""

import numpy as np

from agmm import Kernel, Truth, gen_example, mean_circular_error, select_model, smooth_cv, smooth_fit

for e in (3, 4, 5):
    data = gen_example(e, seed=4).data
    xs = np.linspace(-0.95, 0.95, 200)
    truth = Truth(e)(xs)
    h = smooth_cv(data, folds=5, seed=0)
    sm = smooth_fit(data, Kernel("triangular", h), degenerate="zero")
    em, _ = select_model(data, range(1, 6), range(1, 6))
    print(f"example {e}: smoother h={h:.3f} MCE={mean_circular_error(truth, sm.predict(xs)):.4f}   "
          f"EM MCE={mean_circular_error(truth, em.predict(xs)):.4f}")
