"""Gaussian pair copula: density, h-function and the tau <-> theta maps.

Run with ``python demos/copula_basics.py``.
"""
import numpy as np

from gpvine import bicop

theta = bicop.tau_to_theta("gaussian", 0.5)
print(f"Kendall tau 0.5 corresponds to Gaussian theta {theta:.6f}")
for fam in ("clayton", "gumbel", "student"):
    print(f"  {fam:8s} theta at tau 0.5: {bicop.tau_to_theta(fam, 0.5):.6f}")

u = np.array([0.1, 0.5, 0.9])
v = np.array([0.2, 0.5, 0.7])
print("density c(u, v):", np.round(bicop.gaussian_pdf(u, v, theta), 4))
print("h(u | v):       ", np.round(bicop.gaussian_h(u, v, theta), 4))

# maximum likelihood on a simulated sample
rng = np.random.default_rng(0)
x = rng.multivariate_normal([0, 0], [[1, theta], [theta, 1]], size=500)
from scipy.special import ndtr
fit = bicop.fit_theta_mle(ndtr(x))
print(f"MLE on 500 draws: theta {fit.theta:.4f}, tau {fit.tau:.4f}")
