"""Fit a parametric, a non-parametric and two combined models on the toy problem.

Run with ``python3 demos/toy_walkthrough.py``. Takes well under a minute.
"""

import numpy as np

from semiparam.core import rmse
from semiparam.methods import MethodSettings, fit_method
from semiparam.scenarios import load_scenario


def main():
    scn = load_scenario("toy", seed=0)
    settings = MethodSettings(gp_max_iters=300)
    print(f"train rows: {scn.train.n}, true coefficients: (2.0, -1.5, 3.0, 2.4)")
    print(f"{'method':<10} {'interp RMSE':>12} {'extrap RMSE':>12}  coefficients")
    for method in ("LLS", "SVR", "GP", "SPGP", "SVR-GP"):
        fitted = fit_method(method, scn, seed=0, settings=settings)
        errs = [rmse(fitted.predict(scn.splits[s].inputs), scn.splits[s].targets)[0]
                for s in ("interp_test", "extrap_test")]
        coef = "-" if fitted.coefficients is None else np.array2string(
            np.asarray(fitted.coefficients), precision=2)
        print(f"{method:<10} {errs[0]:>12.3f} {errs[1]:>12.3f}  {coef}")


if __name__ == "__main__":
    main()
