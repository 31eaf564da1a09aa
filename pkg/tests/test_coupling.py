"""Tests for the coupling stage: star reduction, loop solve, closed form, FRC."""

import math

import numpy as np
import pytest

from coupling import (
    CouplingNetwork,
    coupling_factor_closed_form,
    coupling_matrix,
    frc_cm_current,
    kvl_residual,
    reduce_deltas,
    solve_coupling,
)
from errors import FrequencyRowError, SingularSystemError
from frequency_grid import FrequencyGrid, default_grid, single_point
from numeric_core import ImpedanceElement, evaluate_impedance

W_100K = 2 * math.pi * 1e5


def _uniform_network(elem, **overrides):
    fields = {name: elem for name in
              ("z_ga1", "z_sa1", "z_gs1", "z_ga2", "z_sa2", "z_gs2", "z_g", "z_s", "z_v")}
    fields.update(overrides)
    return CouplingNetwork(**fields)


# --- star reduction ---


def test_symmetric_deltas_reduce_to_a_third():
    net = _uniform_network(ImpedanceElement(r_ohm=3.0))
    assert reduce_deltas(net, 1.0) == pytest.approx((1, 1, 1, 1, 1, 1))


def test_reference_legs_follow_correspondence_table(reference_coupling):
    net = reference_coupling
    z = {name: evaluate_impedance(getattr(net, name), W_100K)
         for name in ("z_ga1", "z_sa1", "z_gs1", "z_ga2", "z_sa2", "z_gs2")}
    s1 = z["z_gs1"] + z["z_ga1"] + z["z_sa1"]
    s2 = z["z_gs2"] + z["z_ga2"] + z["z_sa2"]
    expected = (
        z["z_ga1"] * z["z_gs1"] / s1,
        z["z_sa1"] * z["z_gs1"] / s1,
        z["z_ga1"] * z["z_sa1"] / s1,
        z["z_ga2"] * z["z_gs2"] / s2,
        z["z_sa2"] * z["z_gs2"] / s2,
        z["z_ga2"] * z["z_sa2"] / s2,
    )
    assert reduce_deltas(net, W_100K) == pytest.approx(expected, rel=1e-12)


def test_swapping_ga1_and_sa1_swaps_z11_and_z12(reference_coupling):
    net = reference_coupling
    swapped = net.model_copy(update={"z_ga1": net.z_sa1, "z_sa1": net.z_ga1})
    z11, z12, z13, *_ = reduce_deltas(net, W_100K)
    s11, s12, s13, *_ = reduce_deltas(swapped, W_100K)
    assert s11 == pytest.approx(z12, rel=1e-12)
    assert s12 == pytest.approx(z11, rel=1e-12)
    assert s13 == pytest.approx(z13, rel=1e-12)


def test_vs2_is_accepted_as_sa2_alias():
    elem = {"r_ohm": 1.0}
    net = CouplingNetwork.model_validate({
        "z_ga1": elem, "z_sa1": elem, "z_gs1": elem, "z_ga2": elem,
        "z_vs2": {"r_ohm": 2.0}, "z_gs2": elem, "z_g": elem, "z_s": elem, "z_v": elem,
    })
    assert net.z_sa2.r_ohm == 2.0


# --- loop solve ---


def test_zero_source_gives_zero_currents(reference_coupling):
    sol = solve_coupling(reference_coupling, W_100K, source_amplitude=0.0)
    assert (sol.i_a, sol.i_g, sol.i_s, sol.i_cm) == (0, 0, 0, 0)


def test_reference_solve_satisfies_loop_equations(reference_coupling):
    sol = solve_coupling(reference_coupling, W_100K)
    assert kvl_residual(reference_coupling, W_100K, sol, 300.0) < 1e-9 * 300.0


def test_cm_current_is_half_line_sum_and_mu_times_vs(reference_coupling):
    sol = solve_coupling(reference_coupling, W_100K)
    assert sol.i_cm == (sol.i_g + sol.i_s) / 2
    assert sol.i_cm == pytest.approx(sol.mu * 300.0, rel=1e-9)


def test_currents_scale_linearly_with_source(reference_coupling):
    one = solve_coupling(reference_coupling, W_100K, source_amplitude=1.0)
    big = solve_coupling(reference_coupling, W_100K, source_amplitude=300.0)
    assert big.i_cm == pytest.approx(300.0 * one.i_cm, rel=1e-12)
    assert big.mu == one.mu


def test_matrix_rows_match_loop_coefficients(reference_coupling):
    a = coupling_matrix(reference_coupling, W_100K)
    z11, z12, z13, z21, z22, z23 = reduce_deltas(reference_coupling, W_100K)
    assert a.shape == (3, 3)
    assert a[0, 0] == pytest.approx(z11 + z13)
    assert a[2, 2] == pytest.approx(
        z12 + evaluate_impedance(reference_coupling.z_v, W_100K) + z22 + z23 + z13
    )


# --- closed form ---


@pytest.mark.parametrize("freq", [1e3, 1e5])
def test_closed_form_matches_solver_on_reference(reference_coupling, freq):
    w = 2 * math.pi * freq
    mu = solve_coupling(reference_coupling, w).mu
    assert coupling_factor_closed_form(reference_coupling, w) == pytest.approx(mu, rel=1e-9)


def test_closed_form_matches_solver_over_reference_grid(reference_coupling):
    for f in default_grid().frequencies():
        w = 2 * math.pi * f
        mu = solve_coupling(reference_coupling, w).mu
        assert coupling_factor_closed_form(reference_coupling, w) == pytest.approx(mu, rel=1e-8)


def test_closed_form_matches_solver_on_random_networks(random_element):
    rng = np.random.default_rng(20240601)
    names = ("z_ga1", "z_sa1", "z_gs1", "z_ga2", "z_sa2", "z_gs2", "z_g", "z_s", "z_v")
    for _ in range(1000):
        w = 2 * math.pi * 10 ** rng.uniform(2, 5.5)
        net = CouplingNetwork(**{name: random_element(rng, w) for name in names})
        mu = solve_coupling(net, w).mu
        assert coupling_factor_closed_form(net, w) == pytest.approx(mu, rel=1e-8)


def test_closed_form_ignores_source_amplitude(reference_coupling):
    low = reference_coupling.model_copy(update={"source_amplitude": 1.0})
    assert coupling_factor_closed_form(low, W_100K) == coupling_factor_closed_form(
        reference_coupling, W_100K
    )


# --- frequency response ---


def test_reference_frc_is_high_pass(reference_coupling):
    rows = frc_cm_current(reference_coupling, default_grid())
    assert len(rows) == 200
    freqs = [r.frequency_hz for r in rows]
    assert freqs == sorted(freqs)
    assert rows[-1].magnitude > rows[0].magnitude
    low_decade = [r.magnitude for r in rows if r.frequency_hz <= 500.0]
    assert all(b >= a * (1 - 1e-12) for a, b in zip(low_decade, low_decade[1:]))


def test_single_point_frc_matches_solve(reference_coupling):
    (row,) = frc_cm_current(reference_coupling, single_point(1e5))
    sol = solve_coupling(reference_coupling, W_100K)
    assert row.frequency_hz == 1e5
    assert row.magnitude == pytest.approx(abs(sol.i_cm), rel=1e-12)
    assert row.phase_rad == pytest.approx(math.atan2(sol.i_cm.imag, sol.i_cm.real))


def test_doubling_capacitances_raises_cm_current(reference_coupling):
    w = 2 * math.pi * 1e3
    update = {}
    for name in ("z_ga1", "z_sa1", "z_gs1", "z_ga2", "z_sa2", "z_gs2", "z_g", "z_s"):
        elem = getattr(reference_coupling, name)
        update[name] = elem.model_copy(update={"c_farad": 2 * elem.c_farad})
    doubled = reference_coupling.model_copy(update=update)
    assert abs(solve_coupling(doubled, w).i_cm) > abs(solve_coupling(reference_coupling, w).i_cm)


def test_failing_row_names_its_frequency(monkeypatch, reference_coupling, reset_metrics):
    import coupling
    import metrics

    real = coupling.solve_coupling

    def _flaky(net, omega, source_amplitude=None):
        if omega > 2 * math.pi * 3e3:
            raise SingularSystemError(2)
        return real(net, omega, source_amplitude)

    monkeypatch.setattr(coupling, "solve_coupling", _flaky)
    grid = FrequencyGrid(start_hz=100.0, stop_hz=1e4, points=3)
    with pytest.raises(FrequencyRowError) as exc:
        frc_cm_current(reference_coupling, grid)
    assert exc.value.frequency_hz == pytest.approx(1e4)
    assert isinstance(exc.value.cause, SingularSystemError)
    assert 'gndline_row_failures_total{kind="coupling"} 1' in metrics.render_prometheus()
