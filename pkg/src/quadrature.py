"""
Adaptive quadrature over a frequency window

Vectorized Gauss-Kronrod bisection: every active subinterval is evaluated with
the 15-point Kronrod rule and its embedded 7-point Gauss rule in one call of the
integrand, so integrands must accept numpy arrays. Known peak locations seed the
initial subdivision.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from config import settings
from src.errors import ParameterError, QuadratureError

logger = logging.getLogger(__name__)

# Kronrod abscissae on [0, 1] (descending) with weights; odd entries are the Gauss nodes
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[1:7:2] = _WG[:-1]
GAUSS_WEIGHTS[7] = _WG[-1]
GAUSS_WEIGHTS[9:15:2] = _WG[-2::-1]

MAX_BISECTIONS = 60


@dataclass(frozen=True)
class QuadratureWindow:
    """Integration bounds in cm⁻¹ and the absolute tolerance of each integral"""

    lower: float
    upper: float
    absolute_tolerance: float = settings.QUAD_ABS_TOL

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)) or not self.lower < self.upper:
            raise ParameterError(f"window needs lower < upper, got [{self.lower}, {self.upper}]")
        if not 0.0 < self.absolute_tolerance <= 1e-4:
            raise ParameterError(
                f"quadrature tolerance must lie in (0, 1e-4], got {self.absolute_tolerance}"
            )

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def grid(self, points: int) -> np.ndarray:
        return np.linspace(self.lower, self.upper, points)


@dataclass(frozen=True)
class QuadratureResult:
    value: complex
    error: float
    intervals: int


def default_window(energies: Iterable[float], rates: Iterable[float],
                   padding: Optional[float] = None,
                   tolerance: Optional[float] = None) -> QuadratureWindow:
    """[min ε − pad·max Γ, max ε + pad·max Γ]"""
    energies = np.asarray(list(energies), dtype=float)
    rates = np.asarray(list(rates), dtype=float)
    pad = (settings.WINDOW_PADDING if padding is None else padding) * float(np.max(rates))
    return QuadratureWindow(
        lower=float(np.min(energies)) - pad,
        upper=float(np.max(energies)) + pad,
        absolute_tolerance=tolerance or settings.QUAD_ABS_TOL,
    )


def _initial_edges(window: QuadratureWindow, breakpoints: Iterable[float], pieces: int) -> np.ndarray:
    edges = list(np.linspace(window.lower, window.upper, pieces + 1))
    edges += [p for p in breakpoints if window.lower < p < window.upper]
    edges = np.unique(np.asarray(edges, dtype=float))
    return edges


def integrate(func: Callable[[np.ndarray], np.ndarray], window: QuadratureWindow,
              breakpoints: Iterable[float] = (), tolerance: Optional[float] = None,
              max_intervals: Optional[int] = None) -> QuadratureResult:
    """
    Integrate a vectorized (real or complex) function over the window.

    An interval is accepted once its Kronrod/Gauss difference is below
    tol·(interval width / window width), so accepted errors add up to at most
    tol. Accepted pieces are summed in left-endpoint order with math.fsum.
    """
    tol = window.absolute_tolerance if tolerance is None else tolerance
    max_intervals = max_intervals or settings.QUAD_MAX_INTERVALS
    edges = _initial_edges(window, breakpoints, settings.QUAD_INITIAL_PIECES)
    left, right = edges[:-1], edges[1:]
    total_width = window.width

    done_left, done_value, done_error = [], [], []
    for _ in range(MAX_BISECTIONS):
        centre = 0.5 * (left + right)
        half = 0.5 * (right - left)
        x = centre[:, None] + half[:, None] * NODES[None, :]
        fx = np.asarray(func(x.ravel())).reshape(x.shape)
        kronrod = half * (fx @ KRONROD_WEIGHTS)
        gauss = half * (fx @ GAUSS_WEIGHTS)
        error = np.abs(kronrod - gauss)
        if not np.all(np.isfinite(error)):
            raise QuadratureError("integrand is not finite inside the window", math.inf, tol)

        accept = error <= tol * (right - left) / total_width
        done_left.append(left[accept])
        done_value.append(kronrod[accept])
        done_error.append(error[accept])

        left, right = left[~accept], right[~accept]
        if left.size == 0:
            break
        if 2 * left.size > max_intervals:
            achieved = float(np.sum(error))
            raise QuadratureError(
                f"more than {max_intervals} active subintervals", achieved, tol
            )
        mid = 0.5 * (left + right)
        left, right = np.concatenate([left, mid]), np.concatenate([mid, right])
    else:
        achieved = float(np.sum(np.abs(error)))
        raise QuadratureError("bisection depth exhausted", achieved, tol)

    starts = np.concatenate(done_left)
    values = np.concatenate(done_value)
    errors = np.concatenate(done_error)
    order = np.argsort(starts, kind="stable")
    values = values[order]
    if np.iscomplexobj(values):
        value = complex(math.fsum(values.real), math.fsum(values.imag))
    else:
        value = math.fsum(values)
    logger.debug("Quadrature over [%g, %g]: %d intervals", window.lower, window.upper, starts.size)
    return QuadratureResult(value=value, error=float(math.fsum(errors)), intervals=int(starts.size))
