from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chdyn.model import AC, CH, ModelParams
from chdyn.oracle import DenseOracle
from chdyn.schur import (SchurOperator, build_schur, compatibility_defect,
                         recover_potentials)


@pytest.mark.parametrize("mode", [CH, AC])
@pytest.mark.parametrize("n", [1, 2, 4])
def test_schur_spd(square, general_params, double_well, mode, n):
    mesh, disc = square(n)
    params = replace(general_params, bc_mode=mode)
    S = SchurOperator(disc, params).S.toarray()
    assert np.abs(S - S.T).max() <= 1e-14 * np.abs(S).max()
    assert np.linalg.eigvalsh(S).min() > 0
    oracle = DenseOracle(mesh, params, double_well, double_well)
    np.testing.assert_allclose(S, oracle.schur_dense(), atol=1e-13 * np.abs(S).max())


@pytest.mark.parametrize("n", [1, 3])
def test_constant_vector_positive(square, n):
    _, disc = square(n)
    params = ModelParams(m=2.0)
    S = SchurOperator(disc, params).S.toarray()
    one = np.ones(disc.nb)
    bulk_part = 2.0 * one @ disc.block("GG").toarray() @ one
    # with no interior vertices the bulk part vanishes and the surface term carries S
    assert bulk_part >= -1e-14
    assert one @ S @ one > bulk_part + 1e-3


def test_ac_surface_part_is_diagonal(square, general_params):
    _, disc = square(3)
    params = replace(general_params, bc_mode=AC)
    S = SchurOperator(disc, params).S.toarray()
    rest = S - params.m * disc.block("GG").toarray()
    expected = params.m_gamma * disc.m_omega[:disc.nb] ** 2 / disc.m_gamma
    np.testing.assert_allclose(rest, np.diag(expected), atol=1e-15)


@pytest.mark.parametrize("mode", [CH, AC])
def test_equilibrium_gives_zero_potentials(square, general_params, double_well, mode):
    _, disc = square(2)
    params = replace(general_params, bc_mode=mode)
    one = np.ones(disc.n)
    pots = recover_potentials(SchurOperator(disc, params), one, one, params,
                              double_well, double_well)
    assert np.abs(pots.P).max() == 0 and np.abs(pots.P_gamma).max() == 0


@pytest.mark.parametrize("method", ["cholesky", "cg"])
@pytest.mark.parametrize("mode", [CH, AC])
def test_matches_monolithic_solve(square, general_params, double_well, wetting, rng,
                                  method, mode):
    mesh, disc = square(4)
    params = replace(general_params, bc_mode=mode)
    schur = SchurOperator(disc, params, method=method, cg_tol=1e-12)
    oracle = DenseOracle(mesh, params, double_well, wetting)
    for _ in range(5):
        phi, old = rng.uniform(-1.2, 1.2, (2, disc.n))
        got = recover_potentials(schur, phi, old, params, double_well, wetting)
        ref = oracle.coupled_solve(phi, old)
        assert np.abs(got.P - ref.P).max() <= 1e-8 * np.abs(ref.P).max()
        assert np.abs(got.P_gamma - ref.P_gamma).max() <= 1e-8 * np.abs(ref.P_gamma).max()
        _, rel = compatibility_defect(disc, params, got)
        assert rel <= 10 * schur.tol


def test_cg_nonconvergence_reported(square, general_params):
    _, disc = square(8)
    schur = SchurOperator(disc, general_params, method="cg", cg_tol=1e-14, cg_maxit=1)
    from chdyn.schur import SchurSolveError
    with pytest.raises(SchurSolveError):
        schur.solve(np.random.default_rng(0).standard_normal(disc.nb))


def test_build_schur_mode_override(square, general_params):
    _, disc = square(2)
    assert build_schur(disc, general_params, mode=AC).mode == AC
    with pytest.raises(ValueError):
        build_schur(disc, general_params, method="lu")


@settings(max_examples=25, deadline=None)
@given(st.floats(-5, 5), st.integers(0, 2 ** 31))
def test_recovery_is_linear_in_residuals(alpha, seed):
    from chdyn.assembly import Discretization
    from chdyn.mesh import structured_unit_square
    disc = Discretization.from_mesh(structured_unit_square(3))
    schur = SchurOperator(disc, ModelParams(m=0.8, m_gamma=1.7))
    rng = np.random.default_rng(seed)
    rb, ri = rng.standard_normal(disc.nb), rng.standard_normal(disc.n - disc.nb)
    one = schur.recover(rb, ri)
    scaled = schur.recover(alpha * rb, alpha * ri)
    np.testing.assert_allclose(scaled.P, alpha * one.P, atol=1e-11 * (1 + abs(alpha)))
    np.testing.assert_allclose(scaled.P_gamma, alpha * one.P_gamma, atol=1e-11 * (1 + abs(alpha)))
