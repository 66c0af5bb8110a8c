"""
Kernel-local EM
===============

The nonparametric variant keeps one local mean, variance and set of mixing
weights per grid point, smoothed by a kernel in x.  Here it is compared to the
parametric fit on the von Mises example.
"""

import numpy as np

from agmm import Kernel, Truth, gen_example, mean_circular_error, select_K_local, select_model

ex = gen_example(5, seed=2)
data = ex.data
xs = np.linspace(-0.95, 0.95, 200)
truth = Truth(5)(xs)

for h in (0.01, 0.05, 0.2):
    K, fits = select_K_local(data, Kernel("gaussian", h), range(1, 5))
    model, rep = fits[K]
    err = mean_circular_error(truth, model.predict(xs))
    print(f"h={h:<5} K={K}  iterations={rep.iterations}  MCE={err:.4f}  "
          f"mean local variance={np.mean(model.sigma2):.4f}")

par, rep = select_model(data, range(1, 6), range(1, 6))
print(f"parametric: degree={par.basis.degree} K={par.K}  "
      f"MCE={mean_circular_error(truth, par.predict(xs)):.4f}")
print("true noise variance:", round(ex.sigma2_truth, 4))
