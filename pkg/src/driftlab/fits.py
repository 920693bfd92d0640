"""Log-log regression helpers used by certificates, pinching reports and fits.

All decay measurements in the lab reduce to fitting |y| ~ C * x^(-tau) by
least squares on log-log data.  A fit is only trusted when its R^2 clears a
quality bar; quantities that vanish identically (plateau design makes many
remainders exactly zero) are reported as exact instead of fitted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EXACT_FLOOR = 1e-13


@dataclass(frozen=True)
class PowerFit:
    """Result of fitting |y| ~ C * x^(-tau) on log-log data.

    ``exact`` is set when the data sits at the floating-point floor and no
    regression is meaningful; such quantities vanish by design.
    """

    C: float
    tau: float
    r2: float
    exact: bool = False
    n_points: int = 0

    @property
    def accepted(self) -> bool:
        return self.exact or self.r2 >= 0.95


def fit_power_law(x, y, floor: float = EXACT_FLOOR) -> PowerFit:
    """Fit |y| ~ C x^(-tau); points with |y| <= floor are dropped.

    Returns an exact fit when fewer than two points survive the floor.
    """
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise ValueError("x and y must have the same shape")
    keep = y > floor
    if keep.sum() < 2:
        return PowerFit(C=0.0, tau=np.inf, r2=1.0, exact=True, n_points=int(keep.sum()))
    lx = np.log(x[keep])
    ly = np.log(y[keep])
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return PowerFit(C=float(np.exp(intercept)), tau=float(-slope), r2=r2,
                    exact=False, n_points=int(keep.sum()))


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x (y must be positive)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("loglog_slope needs positive y data")
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


def tail_decay_exponent(r, values, decade: float = 10.0, floor: float = EXACT_FLOOR) -> PowerFit:
    """Decay exponent of |values| over the top `decade` of the r-ladder.

    Matches the convention used by certificates: power laws are asserted
    asymptotically, so only the outermost decade enters the regression.
    """
    r = np.asarray(r, dtype=float)
    values = np.asarray(values, dtype=float)
    top = r >= r.max() / decade
    return fit_power_law(r[top], values[top], floor=floor)
