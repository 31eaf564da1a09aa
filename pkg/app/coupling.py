"""Coupling stage: GND-wire injection -> common-mode current on the victim line pair.

Both parasitic triangles are reduced to stars, the three loop equations are
collected into A_cp·[I_a, I_g, I_s]^T = [Vs, 0, 0]^T, and the CM current is
I_CM = (I_g + I_s)/2 = mu·Vs.

Collected coefficients (loop 3 closes through ``I_s``)::

    row 1: [ z11+z13,  -(z11+z13),           -z13                     ]
    row 2: [ z11,      -(z11+z21+zg),        z12+zv+z22               ]
    row 3: [ -z13,     z23+z13,              z12+zv+z22+z23+z13       ]

``z_s`` enters none of the loops; it is still validated and evaluated so a
scenario cannot carry a broken element unnoticed.
"""
from dataclasses import dataclass

import numpy as np
from pydantic import AliasChoices, BaseModel, ConfigDict, Field

from config import settings
from errors import NearZeroDenominatorError
from frequency_grid import FrcRow, FrequencyGrid, frc_row
from numeric_core import ImpedanceElement, delta_to_y, evaluate_impedance, extended, solve_linear
from workers import sweep_frequencies


class CouplingNetwork(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    source_amplitude: float = 300.0
    z_ga1: ImpedanceElement
    z_sa1: ImpedanceElement
    z_gs1: ImpedanceElement
    z_ga2: ImpedanceElement
    # Also written z_vs2 in circuit sketches; same element.
    z_sa2: ImpedanceElement = Field(validation_alias=AliasChoices("z_sa2", "z_vs2"))
    z_gs2: ImpedanceElement
    z_g: ImpedanceElement
    z_s: ImpedanceElement
    z_v: ImpedanceElement


@dataclass(frozen=True)
class CouplingSolution:
    i_a: complex
    i_g: complex
    i_s: complex
    i_cm: complex
    mu: complex
    omega: float


def reduce_deltas(net: CouplingNetwork, omega: float):
    """Star legs (z11, z12, z13, z21, z22, z23) of the two parasitic triangles."""
    z11, z12, z13 = delta_to_y(
        evaluate_impedance(net.z_gs1, omega),
        evaluate_impedance(net.z_sa1, omega),
        evaluate_impedance(net.z_ga1, omega),
    )
    z21, z22, z23 = delta_to_y(
        evaluate_impedance(net.z_gs2, omega),
        evaluate_impedance(net.z_sa2, omega),
        evaluate_impedance(net.z_ga2, omega),
    )
    return z11, z12, z13, z21, z22, z23


def _line_impedances(net: CouplingNetwork, omega: float):
    evaluate_impedance(net.z_s, omega)
    return evaluate_impedance(net.z_g, omega), evaluate_impedance(net.z_v, omega)


def _loop_rows(legs, zg, zv) -> list[list]:
    """Loop-equation coefficients; works on complex or EXTENDED values."""
    z11, z12, z13, z21, z22, z23 = legs
    series = z12 + zv + z22
    return [
        [z11 + z13, -(z11 + z13), -z13],
        [z11, -(z11 + z21 + zg), series],
        [-z13, z23 + z13, series + z23 + z13],
    ]


def coupling_matrix(net: CouplingNetwork, omega: float) -> np.ndarray:
    return np.array(_loop_rows(reduce_deltas(net, omega), *_line_impedances(net, omega)), dtype=complex)


def _loop_residual(net: CouplingNetwork, omega: float, rhs):
    rows = _loop_rows(extended(reduce_deltas(net, omega)), *extended(_line_impedances(net, omega)))
    target = extended(rhs)

    def residual(currents):
        cur = extended(currents)
        return [t - sum(c * i for c, i in zip(row, cur)) for t, row in zip(target, rows)]

    return residual


def solve_coupling(
    net: CouplingNetwork, omega: float, source_amplitude: float | None = None
) -> CouplingSolution:
    vs = net.source_amplitude if source_amplitude is None else float(source_amplitude)
    # Solve for a unit source and scale, so currents are exactly linear in Vs.
    unit_source = np.array([1.0, 0.0, 0.0])
    unit = solve_linear(
        coupling_matrix(net, omega), unit_source, residual=_loop_residual(net, omega, unit_source)
    )
    i_a, i_g, i_s = (complex(vs * x) for x in unit)
    return CouplingSolution(
        i_a=i_a,
        i_g=i_g,
        i_s=i_s,
        i_cm=(i_g + i_s) / 2,
        mu=complex(unit[1] + unit[2]) / 2,
        omega=float(omega),
    )


def kvl_residual(net: CouplingNetwork, omega: float, sol: CouplingSolution, vs: float) -> float:
    """Max |lhs| of the three loop equations in expanded form, re-substituted."""
    z11, z12, z13, z21, z22, z23 = reduce_deltas(net, omega)
    zg, zv = _line_impedances(net, omega)
    ia, ig, is_ = sol.i_a, sol.i_g, sol.i_s
    loop1 = z11 * (ia - ig) + z13 * (ia - ig - is_) - vs
    loop2 = z11 * (ia - ig) + (z12 + zv + z22) * is_ - z21 * ig - zg * ig
    loop3 = (z12 + zv + z22) * is_ + z23 * (is_ + ig) - z13 * (ia - ig - is_)
    return max(abs(loop1), abs(loop2), abs(loop3))


def coupling_factor_closed_form(net: CouplingNetwork, omega: float) -> complex:
    """mu from the numerator / F polynomial.

    N/F alone equals (I_g + I_s)/Vs; the extra factor 1/2 makes it
    I_CM/Vs so it agrees with ``solve_coupling(...).mu``. The 25 products of F
    are summed in EXTENDED; with random leg angles they can cancel.
    """
    z11, z12, z13, z21, z22, z23 = extended(reduce_deltas(net, omega))
    zg, zv = extended(_line_impedances(net, omega))
    numerator = (z11 + z13) * (z12 + z22 + zv) + z13 * (z21 + zg + z11)
    f = (
        z11 * z12 * z21 + z11 * z13 * z21 + z11 * z12 * z23 + z12 * z13 * z21
        + z11 * z13 * z23 + z12 * z13 * z23 + z11 * z21 * z22 + z11 * z21 * z23
        + z11 * z22 * z23 + z13 * z21 * z22 + z13 * z21 * z23 + z13 * z22 * z23
        + z11 * z12 * zg + z11 * z13 * zg + z12 * z13 * zg + z11 * z22 * zg
        + z11 * z23 * zg + z13 * z22 * zg + z13 * z23 * zg + z11 * z21 * zv
        + z11 * z23 * zv + z13 * z21 * zv + z13 * z23 * zv + z11 * zg * zv
        + z13 * zg * zv
    )
    if abs(f) < settings.solver_epsilon:
        raise NearZeroDenominatorError("F", float(abs(f)))
    return complex(numerator / (2 * f))


def frc_cm_current(net: CouplingNetwork, grid: FrequencyGrid) -> list[FrcRow]:
    def _row(freq):
        return frc_row(freq, solve_coupling(net, 2 * np.pi * freq).i_cm)

    return sweep_frequencies("coupling", grid.frequencies(), _row)
