import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motoo_lab.model import (
    Diffusion,
    Drift,
    ModelEvaluationError,
    ModelSpec,
    UnknownFamilyError,
    brownian_model,
    default_x_grid,
    model_from_mapping,
    reference_model,
    validate_model,
)


def test_brownian_constants_pass_with_zero_violation():
    rep = validate_model(brownian_model())
    assert rep.passed
    assert all(c.worst_violation == 0.0 for c in rep.checks)


def test_negative_drift_fails_mu_check_at_two():
    spec = ModelSpec(Drift.of("linear", a=1.0), Diffusion.of("constant", value=1.0), 1.0, 0.0, 1.0, 1.0, 1.0)
    rep = validate_model(spec, x_grid=[2.0], t_grid=[0.0])
    by_name = {c.name: c for c in rep.checks}
    assert not by_name["inf x*f/g^2 >= mu"].passed
    assert by_name["inf x*f/g^2 >= mu"].worst_violation == pytest.approx(4.0)


def test_reference_model_passes_on_wide_grid():
    x = np.linspace(-100, 100, 2001)
    rep = validate_model(reference_model(), x_grid=x)
    assert rep.passed
    # direct evaluation: x f = x^2/(1+x^2) < 1 and g in (1, 2]
    assert np.max(x * reference_model().drift(x)) < 1.0
    g = reference_model().diffusion(x)
    assert g.min() > 1.0 and g.max() == 2.0


def test_sigma_gap_is_reported_not_judged():
    rep = validate_model(reference_model(), x_grid=[-3.0, 0.0, 3.0])
    assert rep.sigma_gap == pytest.approx(0.1)
    assert rep.passed


def test_validation_is_deterministic():
    a = validate_model(reference_model()).to_dict()
    b = validate_model(reference_model()).to_dict()
    assert a == b


def test_errors():
    with pytest.raises(ValueError):
        validate_model(reference_model(), x_grid=[])
    with pytest.raises(ValueError):
        validate_model(reference_model(), tol=0.0)
    with pytest.raises(UnknownFamilyError):
        Drift.of("cubic")
    with pytest.raises(ValueError):
        Diffusion.of("constant", amp=2.0)
    with pytest.raises(ValueError):
        ModelSpec(Drift.of("zero"), Diffusion.of("constant"), 0.0, 0.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        ModelSpec(Drift.of("zero"), Diffusion.of("constant"), 1.0, -0.5, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        ModelSpec(Drift.of("zero"), Diffusion.of("constant"), 1.0, 0.0, 1.0, 2.0, 1.0)


def test_non_finite_coefficient_names_the_point():
    spec = ModelSpec(Drift.of("linear", a=1e300), Diffusion.of("constant", value=1.0), 1.0, 0.0, 1.0, 1.0, 1.0)
    with pytest.raises(ModelEvaluationError, match="drift is not finite"):
        validate_model(spec, x_grid=[0.0, 1e10], t_grid=[0.0])
    with pytest.raises(ValueError):
        validate_model(spec, x_grid=[np.nan])


def test_zero_diffusion_is_flagged():
    spec = ModelSpec(Drift.of("zero"), Diffusion.of("rational_bump", sigma=1.0, amp=-1.0), 1.0, 0.0, 1.0, 1.0, 1.0)
    rep = validate_model(spec, x_grid=[0.0, 1.0])
    assert not {c.name: c for c in rep.checks}["g != 0"].passed


def test_mapping_round_trip():
    spec = reference_model(x0=-2.5)
    assert model_from_mapping(spec.to_mapping()) == spec


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, default_x_grid().size - 1), min_size=1, max_size=40))
def test_sub_grid_of_passing_grid_passes(idx):
    grid = default_x_grid()
    spec = reference_model()
    assert validate_model(spec, x_grid=grid, tol=1e-300).passed
    assert validate_model(spec, x_grid=grid[idx], tol=1e-300).passed
