"""Error against network size for an SVD kernel on the 2-sphere.

Builds a test function with prescribed smoothness, sweeps the number of
atoms and prints the median errors next to the fitted slope.

    python3 demos/sphere_rates.py [gamma]
"""

import sys

from eignet import run_rate_experiment

gamma = float(sys.argv[1]) if len(sys.argv) > 1 else 1.5
report = run_rate_experiment(
    {
        "name": "sphere",
        "kernel": {"variant": "svd", "q": 2, "bound": 16, "beta": 0},
        "gamma": gamma,
        "M": [64, 256, 1024, 4096],
        "seeds": list(range(4)),
    }
)
fit = report.fits["identity"]
print(f"regime: {report.regime}, levels used: {report.levels_used}")
for M, err in zip([64, 256, 1024, 4096], fit["median_errors"]):
    print(f"  M={M:5d}  median L2 error {err:.4f}")
print(f"slope {fit['measured_exponent']:.3f} (predicted {fit['predicted_exponent']:.3f} on {fit['abscissa']})")
