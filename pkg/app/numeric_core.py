"""Phasor arithmetic shared by the coupling and conversion models.

Impedance elements are series R-L-C atoms evaluated at an angular frequency;
delta_to_y reduces parasitic triangles; solve_linear is a dense LU solve with
partial pivoting for the small (n <= 8) nodal/loop systems. Callers that can
evaluate their equations branch by branch pass a residual, and the solve is
then refined against it in multiprecision (``EXTENDED``).
"""
import math
import warnings
from collections.abc import Callable, Sequence
from typing import Literal

import mpmath
import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field, field_validator

from config import settings
from errors import DegenerateDeltaError, InvalidParameterError, SingularSystemError

ComplexMatrix = np.ndarray
ComplexVector = np.ndarray
Residual = Callable[[ComplexVector], Sequence]
_ULP = 2 * np.finfo(float).eps

# Own context so sweep threads never touch the global mpmath precision.
EXTENDED = mpmath.MPContext()
EXTENDED.dps = settings.extended_dps


def extended(values: Sequence[complex]) -> list:
    """Lift float64 phasors into EXTENDED without rounding."""
    return [EXTENDED.mpc(complex(v)) for v in values]


class ImpedanceElement(BaseModel):
    """Series R + jωL + 1/(jωC). ``c_farad="absent"`` shorts the capacitive branch."""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    r_ohm: float = Field(0.0, ge=0)
    l_henry: float = Field(0.0, ge=0)
    c_farad: float | Literal["absent"] = "absent"

    @field_validator("c_farad")
    @classmethod
    def _capacitance_positive(cls, v):
        if v != "absent" and not v > 0:
            raise ValueError("c_farad must be > 0 or 'absent' (0 F is not a short)")
        return v

    @property
    def elastance(self) -> float:
        """1/C in F^-1; 0 for an absent capacitor."""
        return 0.0 if self.c_farad == "absent" else 1.0 / self.c_farad

    def mean(self, other: "ImpedanceElement") -> "ImpedanceElement":
        """Elementwise mean whose impedance is the exact average of the two."""
        s = 0.5 * (self.elastance + other.elastance)
        return ImpedanceElement(
            r_ohm=0.5 * (self.r_ohm + other.r_ohm),
            l_henry=0.5 * (self.l_henry + other.l_henry),
            c_farad="absent" if s == 0 else 1.0 / s,
        )


def check_omega(omega: float) -> float:
    omega = float(omega)
    if not math.isfinite(omega) or omega <= 0:
        raise InvalidParameterError(f"omega must be finite and > 0, got {omega!r}")
    return omega


def evaluate_impedance(elem: ImpedanceElement, omega: float) -> complex:
    omega = check_omega(omega)
    reactance = omega * elem.l_henry
    if elem.c_farad != "absent":
        reactance -= 1.0 / (omega * elem.c_farad)
    z = complex(elem.r_ohm, reactance)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise InvalidParameterError(f"impedance not finite at omega={omega!r}: {elem!r}")
    return z


def delta_to_y(z_ab: complex, z_bc: complex, z_ca: complex, epsilon: float | None = None):
    """Delta legs (ab, bc, ca) -> star legs (a, b, c).

    Each star leg is the product of the two delta legs meeting at that node
    over the sum of all three.
    """
    eps = settings.solver_epsilon if epsilon is None else epsilon
    total = z_ab + z_bc + z_ca
    if abs(total) < eps:
        raise DegenerateDeltaError(abs(total))
    return z_ab * z_ca / total, z_ab * z_bc / total, z_bc * z_ca / total


def y_to_delta(z_a: complex, z_b: complex, z_c: complex):
    """Inverse of delta_to_y; returns (z_ab, z_bc, z_ca)."""
    p = z_a * z_b + z_b * z_c + z_c * z_a
    return p / z_c, p / z_a, p / z_b


def solve_linear(
    a: ComplexMatrix,
    b: ComplexVector,
    epsilon: float | None = None,
    refinement_steps: int | None = None,
    residual: Residual | None = None,
) -> ComplexVector:
    """Solve a·x = b by row-equilibrated LU with partial pivoting.

    Raises SingularSystemError with the pivot index when a pivot of the
    equilibrated factorization falls below ``epsilon``.

    ``residual(x)`` returns b - a·x evaluated in EXTENDED from the circuit's
    own branch equations. The float64 LU then only supplies corrections, so
    every unknown converges to its own float64 precision rather than to
    eps·max|x|. Refinement stops early once no unknown moves by more than an ulp.
    """
    eps = settings.solver_epsilon if epsilon is None else epsilon
    if refinement_steps is not None:
        steps = refinement_steps
    elif residual is not None:
        steps = settings.extended_refinement_steps
    else:
        steps = settings.refinement_steps
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidParameterError(f"matrix must be square, got shape {a.shape}")
    if b.shape != (a.shape[0],):
        raise InvalidParameterError(f"vector shape {b.shape} does not match matrix {a.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InvalidParameterError("system contains NaN or Inf")

    scale = np.abs(a).max(axis=1)
    zero_rows = np.flatnonzero(scale == 0)
    if zero_rows.size:
        raise SingularSystemError(int(zero_rows[0]), 0.0)
    a_s = a / scale[:, None]
    b_s = b / scale

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a_s, check_finite=False)
    pivots = np.abs(np.diag(lu))
    small = np.flatnonzero(pivots < eps)
    if small.size:
        raise SingularSystemError(int(small[0]), float(pivots[small[0]]))

    x = scipy.linalg.lu_solve((lu, piv), b_s, check_finite=False)
    for _ in range(steps):
        if residual is None:
            r = b_s - a_s @ x
        else:
            r = np.array([complex(v) for v in residual(x)], dtype=complex) / scale
        refined = x + scipy.linalg.lu_solve((lu, piv), r, check_finite=False)
        settled = np.all(np.abs(refined - x) <= _ULP * np.abs(refined))
        x = refined
        if residual is not None and settled:
            break
    return x
