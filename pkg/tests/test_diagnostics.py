"""Conservation reports, error norms, and convergence-order fits."""
import numpy as np
import numpy.testing as npt
import pytest

from phmbd.diagnostics import (
    ConvergenceFit,
    conservation_report,
    constraint_report,
    convergence_orders,
    rms_error,
)
from phmbd.integrate import IntegratorConfig, simulate


def test_conservation_report_power_identity(closed_loop):
    """The collocated supply accounts for every joule, per step."""
    sys, state = closed_loop
    traj = simulate(sys, state, IntegratorConfig(h=0.1, t_end=2.0))
    rep = conservation_report(traj, sys)
    assert rep.power_defect.max() <= 1e-12
    # per-step series live on the intervals; load switches off at t = 1
    assert rep.dH.shape == rep.supplied_energy.shape == (traj.rows - 1,)
    after = rep.t[1:] > 1.0 + 1e-12
    npt.assert_allclose(rep.supplied_energy[after], 0.0, atol=0.0)
    npt.assert_allclose(rep.dH[after], 0.0, atol=1e-9)
    assert rep.metadata["scheme"] == "mp"
    assert rep.metadata["h"] == 0.1


def test_conservation_report_flat_without_loads(flying_pair):
    sys, state = flying_pair
    traj = simulate(sys, state, IntegratorConfig(h=0.001, t_end=0.02))
    rep = conservation_report(traj, sys)
    npt.assert_allclose(rep.supplied_energy, 0.0, atol=0.0)
    assert np.abs(rep.dH).max() <= 1e-9 * abs(rep.H[0])


def test_constraint_report_matches_stored_series(flying_pair):
    sys, state = flying_pair
    traj = simulate(sys, state, IntegratorConfig(h=0.001, t_end=0.01))
    max_g, max_gv = constraint_report(traj, sys)
    npt.assert_allclose(max_g, traj.max_g, atol=1e-15)
    npt.assert_allclose(max_gv, traj.max_gv, atol=1e-15)


def test_rms_error_zero_against_itself(flying_pair):
    sys, state = flying_pair
    traj = simulate(sys, state, IntegratorConfig(h=0.001, t_end=0.01))
    err = rms_error(traj, traj, 0.01)
    assert set(err) >= {"q", "v", "lam", "H", "L"}
    for key in ("q", "v", "lam", "H", "L"):
        assert err[key] == 0.0


def test_rms_error_decreases_with_step(flying_pair):
    sys, state = flying_pair
    ref = simulate(sys, state, IntegratorConfig(h=1e-4, t_end=0.01))
    coarse = simulate(sys, state, IntegratorConfig(h=1e-2, t_end=0.01))
    fine = simulate(sys, state, IntegratorConfig(h=1e-3, t_end=0.01))
    e_coarse = rms_error(coarse, ref, 0.01)
    e_fine = rms_error(fine, ref, 0.01)
    for key in ("q", "v", "H", "L"):
        assert e_fine[key] < e_coarse[key]


def test_convergence_orders_exact_powers():
    h = np.array([1e-1, 1e-2, 1e-3, 1e-4])
    fits = convergence_orders(h, {"second": 3.0 * h**2, "first": 0.5 * h})
    assert isinstance(fits["second"], ConvergenceFit)
    npt.assert_allclose(fits["second"].slope, 2.0, atol=1e-10)
    npt.assert_allclose(fits["first"].slope, 1.0, atol=1e-10)
    assert fits["second"].excluded == ()


def test_convergence_orders_excludes_nonpositive():
    fit = convergence_orders([1e-2, 1e-3, 1e-4, 1e-5],
                             [1e-4, 0.0, 1e-8, 1e-10])
    npt.assert_allclose(fit.slope, 2.0, atol=1e-10)
    assert fit.excluded == (1,)


def test_convergence_orders_needs_three_points():
    with pytest.raises(ValueError):
        convergence_orders([1e-2, 1e-3], [1.0, 0.1])
