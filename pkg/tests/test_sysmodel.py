import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epsctl.errors import (
    DimensionMismatch,
    NonSquare,
    NotPositiveDefinite,
    StructuralAssumptionViolated,
)
from epsctl.sysmodel import (
    CertKind,
    EllipsoidCert,
    LtiSystem,
    OutputFeedbackPlant,
    StateFeedbackPlant,
    as_matrix,
    cl_output_feedback,
    cl_state_feedback,
    require_valid,
    spectral_radius,
    validate_structure,
)

from conftest import random_output_feedback_plant


@pytest.mark.parametrize(
    "M, expected",
    [(np.eye(2), 1.0), ([[0.0, 1.0], [-1.0, 0.0]], 1.0), ([[0.5]], 0.5)],
)
def test_spectral_radius_examples(M, expected):
    assert spectral_radius(M) == pytest.approx(expected, abs=1e-14)


def test_spectral_radius_rejects_rectangular():
    with pytest.raises(NonSquare):
        spectral_radius(np.ones((2, 3)))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_spectral_radius_transpose_invariant(n, seed):
    M = np.random.default_rng(seed).standard_normal((n, n))
    assert abs(spectral_radius(M) - spectral_radius(M.T)) <= 1e-10 * (1 + spectral_radius(M))


def test_as_matrix_rejects_nonfinite():
    with pytest.raises(Exception):
        as_matrix([[np.nan]], "A")
    M = as_matrix([1.0, 2.0], "v")
    assert M.shape == (1, 2) and not M.flags.writeable


def test_lti_defaults_and_dimension_checks():
    S = LtiSystem([[0.5]], [[1.0, 2.0]], [[1.0], [3.0]])
    assert (S.n, S.m, S.p) == (1, 2, 2)
    assert S.strictly_proper and S.D.shape == (2, 2)
    with pytest.raises(DimensionMismatch):
        LtiSystem(np.eye(2), np.ones((3, 1)), np.ones((1, 2)))


def test_siv_plant_passes_all_checks(siv):
    report = validate_structure(siv)
    assert report.ok, report.failures
    assert report["B1D1'=0"].residual == 0.0
    assert report["C2'D2=0"].residual == 0.0


def test_zero_input_map_fails_controllability():
    report = validate_structure(LtiSystem([[0.0]], [[0.0]], [[1.0]]))
    assert not report["controllable(A,B)"].passed


def test_unstable_uncontrollable_mode_fails_stabilizability():
    plant = StateFeedbackPlant([[1.0]], [[0.0]], [[1.0]], [[1.0]], [[0.0]])
    report = validate_structure(plant)
    assert not report["stabilizable(A,B)"].passed
    with pytest.raises(StructuralAssumptionViolated):
        require_valid(plant)


def test_orthogonality_violation_is_reported():
    plant = StateFeedbackPlant([[0.5]], [[1.0]], [[1.0]], [[1.0]], [[1.0]])
    report = validate_structure(plant)
    assert not report["C'D=0"].passed
    assert report["stabilizable(A,B)"].passed


def test_validate_structure_is_pure(siv):
    a, b = validate_structure(siv), validate_structure(siv)
    assert [(c.name, c.passed, c.residual) for c in a.checks] == [
        (c.name, c.passed, c.residual) for c in b.checks
    ]


def test_cl_state_feedback_zero_gain():
    plant = StateFeedbackPlant([[0.5, 1.0], [0.0, 0.2]], [[0.0], [1.0]], [[1.0], [1.0]],
                               [[1.0, 0.0], [0.0, 0.0]], [[0.0], [1.0]])
    cl = cl_state_feedback(plant, np.zeros((1, 2)))
    assert np.array_equal(cl.A, plant.A)
    assert np.array_equal(cl.B, plant.Bw)
    assert np.array_equal(cl.C, plant.C)


def test_cl_state_feedback_scalar_deadbeat(scalar_sf_plant):
    cl = cl_state_feedback(scalar_sf_plant, [[-0.5]])
    assert cl.A[0, 0] == 0.0


def test_cl_state_feedback_table_gain(siv):
    K = np.array([[0.0928, -0.0643]])
    plant = StateFeedbackPlant(siv.A, siv.B2, siv.B1, siv.C2, siv.D2)
    cl = cl_state_feedback(plant, K)
    np.testing.assert_allclose(cl.A, siv.A + siv.B2 @ K)


def test_cl_state_feedback_dimension_mismatch(scalar_sf_plant):
    with pytest.raises(DimensionMismatch):
        cl_state_feedback(scalar_sf_plant, np.zeros((1, 2)))


def test_cl_output_feedback_zero_gains(siv):
    cl = cl_output_feedback(siv, np.zeros((1, 2)), np.zeros((2, 2)))
    n = siv.n
    np.testing.assert_array_equal(cl.A[:n, :n], siv.A)
    np.testing.assert_array_equal(cl.A[n:, n:], siv.A)
    np.testing.assert_array_equal(cl.A[:n, n:], 0)
    np.testing.assert_array_equal(cl.A[n:, :n], 0)
    np.testing.assert_array_equal(cl.C, np.hstack([siv.C2, np.zeros_like(siv.C2)]))


def test_cl_output_feedback_table_gains_stable(siv):
    K = np.array([[0.0928, -0.0643]])
    L = np.array([[0.626, 0.281], [0.5, 0.0]])
    cl = cl_output_feedback(siv, K, L)
    assert cl.n == 4
    assert spectral_radius(cl.A) < 1


def test_cl_output_feedback_scalar_substitution():
    one = [[1.0]]
    plant = OutputFeedbackPlant([[0.5]], one, one, one, [[0.0]], one, [[0.0]])
    cl = cl_output_feedback(plant, [[-0.5]], [[-0.5]])
    np.testing.assert_array_equal(cl.A, [[0.0, 0.5], [0.0, 0.0]])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_output_feedback_eigenvalues_split(seed):
    rng = np.random.default_rng(seed)
    plant = random_output_feedback_plant(rng)
    n = plant.n
    K = rng.standard_normal((plant.B2.shape[1], n)) * 0.3
    L = rng.standard_normal((n, plant.C1.shape[0])) * 0.3
    cl = cl_output_feedback(plant, K, L)
    got = np.sort_complex(np.linalg.eigvals(cl.A))
    want = np.sort_complex(np.concatenate([
        np.linalg.eigvals(plant.A + plant.B2 @ K), np.linalg.eigvals(plant.A + L @ plant.C1)
    ]))
    np.testing.assert_allclose(got, want, atol=1e-9)


def test_ellipsoid_cert_validation():
    cert = EllipsoidCert(np.eye(2), 0.5, CertKind.REACHABLE)
    assert cert.n == 2
    with pytest.raises(NotPositiveDefinite):
        EllipsoidCert(np.diag([1.0, -1.0]), 0.5, CertKind.REACHABLE)
    with pytest.raises(Exception):
        EllipsoidCert([[1.0, 0.5], [0.0, 1.0]], 0.5, CertKind.REACHABLE)
