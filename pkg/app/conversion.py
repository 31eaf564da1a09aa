"""Converting stage: asymmetric line/parasitic impedances turn CM current into DM voltage.

Reduced legs: z1 = Z3I and z8 = Z3O pass through; the left triangle
(Z_L, Z1O, Z1I) becomes (z2, z6, z4) and the right one (Z_R, Z2O, Z2I)
becomes (z3, z7, z5). The nodal unknowns are x = [V1..V6, I1, I2] and the
output DM voltage is V5 - V6.

Closed forms share D = (z6+z7+z8)(z2+z3+z4+z5) + (z2+z3)(z4+z5) and
k2 = c1·c2·(h1 + h2) with h1 = Z_R(Z1O - Z2O), h2 = Z2O(Z_R - Z_L).
"""
import cmath
from dataclasses import dataclass, fields

import numpy as np
from pydantic import BaseModel, ConfigDict

from config import settings
from errors import InconsistentExcitationError, InvalidParameterError, NearZeroDenominatorError
from frequency_grid import FrcRow, FrequencyGrid, frc_row
from numeric_core import ImpedanceElement, delta_to_y, evaluate_impedance, extended, solve_linear
from workers import sweep_frequencies


class ConversionNetwork(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    z_1i: ImpedanceElement
    z_2i: ImpedanceElement
    z_3i: ImpedanceElement
    z_1o: ImpedanceElement
    z_2o: ImpedanceElement
    z_3o: ImpedanceElement
    z_l: ImpedanceElement
    z_r: ImpedanceElement

    def swapped(self) -> "ConversionNetwork":
        """Exchange the two transmission lines."""
        return self.model_copy(update={
            "z_1i": self.z_2i, "z_2i": self.z_1i,
            "z_1o": self.z_2o, "z_2o": self.z_1o,
            "z_l": self.z_r, "z_r": self.z_l,
        })


@dataclass(frozen=True)
class ConversionExcitation:
    v_dm_i: complex = 0j
    i_cm: complex = 0j
    i_3: complex = 0j
    i_4: complex = 0j

    def __post_init__(self):
        for f in fields(self):
            value = complex(getattr(self, f.name))
            if not cmath.isfinite(value):
                raise InvalidParameterError(f"excitation {f.name} must be finite, got {value!r}")
            object.__setattr__(self, f.name, value)

    def __add__(self, other: "ConversionExcitation") -> "ConversionExcitation":
        return ConversionExcitation(
            self.v_dm_i + other.v_dm_i,
            self.i_cm + other.i_cm,
            self.i_3 + other.i_3,
            self.i_4 + other.i_4,
        )


@dataclass(frozen=True)
class ConversionSolution:
    v1: complex
    v2: complex
    v3: complex
    v4: complex
    v5: complex
    v6: complex
    i1: complex
    i2: complex
    # Solved directly in the common/differential basis, not as v5 - v6.
    v_dm_o: complex
    v_cm_o: complex


@dataclass(frozen=True)
class ConversionCoefficients:
    k1: complex
    k2: complex
    k3: complex
    k4: complex
    c1: complex
    c2: complex
    h1: complex
    h2: complex

    def scale(self) -> float:
        """Coefficient scale for symmetry-null comparisons (k1 taken per 1 ohm)."""
        return max(abs(self.k1) * 1.0, abs(self.k3), abs(self.k4))


def reduce_conversion(net: ConversionNetwork, omega: float):
    """(z1, ..., z8) for the nodal system."""
    zl = evaluate_impedance(net.z_l, omega)
    zr = evaluate_impedance(net.z_r, omega)
    z2, z6, z4 = delta_to_y(
        zl, evaluate_impedance(net.z_1o, omega), evaluate_impedance(net.z_1i, omega)
    )
    z3, z7, z5 = delta_to_y(
        zr, evaluate_impedance(net.z_2o, omega), evaluate_impedance(net.z_2i, omega)
    )
    z1 = evaluate_impedance(net.z_3i, omega)
    z8 = evaluate_impedance(net.z_3o, omega)
    return z1, z2, z3, z4, z5, z6, z7, z8


def conversion_matrix(z) -> np.ndarray:
    y1, y2, y3, y4, y5, y6, y7, y8 = (1.0 / complex(v) for v in z)
    a = np.zeros((8, 8), dtype=complex)
    # rows 0-5: nodal equations at V1..V6 in admittances y_k = 1/z_k
    a[0, [0, 1, 2, 6]] = [-y2 - y1, y1, y2, 1.0]
    a[1, [0, 1, 3, 7]] = [y1, -y1 - y3, y3, 1.0]
    a[2, [0, 2, 4]] = [y2, -y2 - y6 - y4, y6]
    a[3, [1, 3, 5]] = [y3, -y7 - y3 - y5, y7]
    a[4, [2, 4, 5]] = [y6, -y6 - y8, y8]
    a[5, [3, 4, 5]] = [y7, y8, -y8 - y7]
    # row 6: I1 + I2 = I_CM + I3 + I4; row 7: V1 - V2 = V_DM,I
    a[6, [6, 7]] = [1.0, 1.0]
    a[7, [0, 1]] = [1.0, -1.0]
    return a


_PAIRS = ((0, 1), (2, 3), (4, 5), (6, 7))


def _pair_bases() -> tuple[np.ndarray, np.ndarray]:
    """Row mix S and unknown map T for the common/differential form.

    Unknown pairs (V1,V2), (V3,V4), (V5,V6), (I1,I2) become (mean, difference);
    the paired KCL rows become (sum, difference). V5 - V6 is then a solved
    unknown instead of a difference of two nearly equal node voltages.
    """
    t = np.zeros((8, 8))
    for i, j in _PAIRS:
        t[i, i] = t[j, i] = 1.0
        t[i, j], t[j, j] = 0.5, -0.5
    s = np.eye(8)
    for i, j in _PAIRS[:3]:
        s[i, j] = 1.0
        s[j, i], s[j, j] = 1.0, -1.0
    return s, t


_ROW_MIX, _UNKNOWN_MAP = _pair_bases()


def nodal_equations(y, x) -> list:
    """Left-hand sides of the eight equations as branch currents.

    Same rows as ``conversion_matrix``; works on complex or EXTENDED values.
    """
    y1, y2, y3, y4, y5, y6, y7, y8 = y
    v1, v2, v3, v4, v5, v6, i1, i2 = x
    return [
        y1 * (v2 - v1) + y2 * (v3 - v1) + i1,
        y1 * (v1 - v2) + y3 * (v4 - v2) + i2,
        y2 * (v1 - v3) + y6 * (v5 - v3) - y4 * v3,
        y3 * (v2 - v4) + y7 * (v6 - v4) - y5 * v4,
        y6 * (v3 - v5) + y8 * (v6 - v5),
        y7 * (v4 - v6) + y8 * (v5 - v6),
        i1 + i2,
        v1 - v2,
    ]


def _mixed_residual(z, b):
    """S·(b - A·T·u) in EXTENDED, for refining the mixed-basis solve."""
    y = [1 / v for v in extended(z)]
    rhs = extended(b)

    def residual(u):
        w = extended(u)
        x = [None] * 8
        for i, j in _PAIRS:
            x[i] = w[i] + w[j] / 2
            x[j] = w[i] - w[j] / 2
        r = [target - lhs for target, lhs in zip(rhs, nodal_equations(y, x))]
        for i, j in _PAIRS[:3]:
            r[i], r[j] = r[i] + r[j], r[i] - r[j]
        return r

    return residual


def solve_conversion(
    net: ConversionNetwork, exc: ConversionExcitation, omega: float
) -> ConversionSolution:
    z = reduce_conversion(net, omega)
    a = conversion_matrix(z)
    b = np.array(
        [0, 0, 0, 0, exc.i_3, exc.i_4, exc.i_cm + exc.i_3 + exc.i_4, exc.v_dm_i], dtype=complex
    )
    u = solve_linear(_ROW_MIX @ a @ _UNKNOWN_MAP, _ROW_MIX @ b, residual=_mixed_residual(z, b))
    x = _UNKNOWN_MAP @ u
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
        raise InconsistentExcitationError(f"no finite solution for {exc!r} at omega={omega!r}")
    return ConversionSolution(*(complex(v) for v in x), v_dm_o=complex(u[5]), v_cm_o=complex(u[4]))


def bridge_coefficients(z) -> tuple[complex, complex, complex, complex]:
    """k1..k4 straight from the reduced legs (Z-form of every numerator)."""
    _, z2, z3, z4, z5, z6, z7, z8 = z
    inner = z2 + z3 + z4 + z5
    shunt = z4 + z5
    d = (z6 + z7 + z8) * inner + (z2 + z3) * shunt
    if abs(d) < settings.solver_epsilon:
        raise NearZeroDenominatorError("D", abs(d))
    k1 = z8 * shunt / d
    k2 = z8 * (z3 * z4 - z2 * z5) / d
    k3 = -z8 * (z6 * inner + z2 * shunt) / d
    k4 = z8 * (z7 * inner + z3 * shunt) / d
    return k1, k2, k3, k4


def conversion_coefficients(net: ConversionNetwork, omega: float) -> ConversionCoefficients:
    z = reduce_conversion(net, omega)
    k1, _, k3, k4 = bridge_coefficients(z)
    _, z2, z3, z4, z5, z6, z7, z8 = z
    d = (z6 + z7 + z8) * (z2 + z3 + z4 + z5) + (z2 + z3) * (z4 + z5)
    zl = evaluate_impedance(net.z_l, omega)
    zr = evaluate_impedance(net.z_r, omega)
    z1i = evaluate_impedance(net.z_1i, omega)
    z2i = evaluate_impedance(net.z_2i, omega)
    z1o = evaluate_impedance(net.z_1o, omega)
    z2o = evaluate_impedance(net.z_2o, omega)
    c1 = z8 / d
    c2 = z1i * z2i / ((zl + z1i + z1o) * (zr + z2i + z2o))
    h1 = zr * (z1o - z2o)
    h2 = z2o * (zr - zl)
    return ConversionCoefficients(
        k1=k1, k2=c1 * c2 * (h1 + h2), k3=k3, k4=k4, c1=c1, c2=c2, h1=h1, h2=h2
    )


def v_dm_o_closed_form(coeffs: ConversionCoefficients, exc: ConversionExcitation) -> complex:
    return coeffs.k1 * exc.v_dm_i + coeffs.k2 * exc.i_cm + coeffs.k3 * exc.i_3 + coeffs.k4 * exc.i_4


def common_mode_transfer(net: ConversionNetwork, omega: float) -> complex:
    """Output CM voltage (V5 + V6)/2 per ampere of input CM current."""
    return solve_conversion(net, ConversionExcitation(i_cm=1.0), omega).v_cm_o


def frc_conversion(net: ConversionNetwork, grid: FrequencyGrid) -> list[FrcRow]:
    def _row(freq):
        return frc_row(freq, conversion_coefficients(net, 2 * np.pi * freq).k2)

    return sweep_frequencies("conversion", grid.frequencies(), _row)
