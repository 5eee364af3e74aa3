import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcf_ttdl.errors import DomainError
from mcf_ttdl.fiber_model import delay_vector
from mcf_ttdl.tolerance_mc import (
    PerturbationSpec,
    compensate_delays,
    perturb_link,
    radius_sensitivity,
    radius_shift,
    run_tolerance_study,
    summarize,
)

LAMS = [1530.0 + 5 * k for k in range(9)]


def test_linear_sensitivity_matches_resolve(table1):
    prof = table1.core(1).profile
    lin = radius_shift(prof, 0.1, "linear").dispersion
    full = radius_shift(prof, 0.1, "resolve").dispersion
    assert lin == pytest.approx(full, rel=0.02)


def test_zero_shift_is_zero(table1):
    s = radius_shift(table1.core(1).profile, 0.0)
    assert (s.tau_g0, s.dispersion, s.slope, s.n_eff) == (0.0, 0.0, 0.0, 0.0)
    with pytest.raises(DomainError):
        radius_shift(table1.core(1).profile, 0.1, "cubic")


def test_sensitivity_is_cached(table1):
    prof = table1.core(2).profile
    assert radius_sensitivity(prof) is radius_sensitivity(prof)


def test_draw_depends_only_on_seed_and_trial(table1):
    spec = PerturbationSpec(0.1, seed=7, trials=5)
    a = perturb_link(table1, spec, trial=3)
    b = perturb_link(table1, PerturbationSpec(0.1, seed=7, trials=500), trial=3)
    c = perturb_link(table1, spec, trial=4)
    assert a == b
    assert a != c


def test_zero_halfwidth_is_identity(table1):
    spec = PerturbationSpec(0.0, seed=1)
    assert perturb_link(table1, spec) is table1
    rep = run_tolerance_study(table1, PerturbationSpec(0.0, seed=1, trials=3), LAMS)
    assert np.all(rep.delay_err == 0) and np.all(rep.incr_err_comp == rep.incr_err)


def test_spec_validation():
    with pytest.raises(DomainError):
        PerturbationSpec(-0.1)
    with pytest.raises(DomainError):
        PerturbationSpec(0.1, trials=0)
    with pytest.raises(DomainError):
        PerturbationSpec(0.1, distribution="normal")


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 10_000))
def test_compensation_equalizes_anchor_delay(table1, seed, trial):
    pert = perturb_link(table1, PerturbationSpec(0.1, seed=seed), trial=trial)
    comp = compensate_delays(pert)
    tau = delay_vector(comp, 1550.0)
    assert np.all(tau == tau[0])
    assert tau[0] == max(c.model.tau_g0 for c in pert.cores)


def test_residual_after_compensation_is_dispersion_scatter(table1):
    spec = PerturbationSpec(0.1, seed=99, trials=1)
    pert = perturb_link(table1, spec, trial=0)
    rep = run_tolerance_study(table1, spec, LAMS)
    for i, (c0, c1) in enumerate(zip(table1.cores, pert.cores)):
        dd = c1.model.dispersion - c0.model.dispersion
        ds = c1.model.slope - c0.model.slope
        x = np.array(LAMS) - 1550.0
        assert np.allclose(rep.delay_err_comp[0, i], dd * x + 0.5 * ds * x**2, rtol=0, atol=1e-8)
    assert np.all(rep.delay_err_comp[0, :, LAMS.index(1550.0)] == 0.0)


def test_doubling_halfwidth_never_reduces_error(table1):
    a = run_tolerance_study(table1, PerturbationSpec(0.1, seed=5, trials=50), LAMS)
    b = run_tolerance_study(table1, PerturbationSpec(0.2, seed=5, trials=50), LAMS)
    assert np.all(b.rms >= a.rms)
    assert np.all(b.rms_comp >= a.rms_comp)


def test_study_reproducible(table1):
    spec = PerturbationSpec(0.1, seed=3, trials=20)
    a = run_tolerance_study(table1, spec, LAMS)
    b = run_tolerance_study(table1, spec, LAMS)
    assert np.array_equal(a.delay_err, b.delay_err) and summarize(a) == summarize(b)


def test_pre_compensation_error_dominated_by_tau(table1):
    rep = run_tolerance_study(table1, PerturbationSpec(0.1, seed=12345, trials=200), LAMS)
    s = summarize(rep)
    assert s["rms_mean"] > 10 * s["rms_comp_mean"]
    assert s["fraction_improved"] >= 0.99
    rows = list(rep.rows())
    assert len(rows) == 200 * 2 * 7 * 9
