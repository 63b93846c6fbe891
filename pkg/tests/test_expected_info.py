"""Expected information assembly, structural checks, and determinant sweeps.

The full reference matrix below was computed at 30-digit precision from
one-dimensional quadratures of the factorized integrals available when
omega12 = 0 and alpha2 = 0, a derivation path disjoint from the 2-D
cubature assembly under test.
"""

import math
from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import philox, random_dp
from esn2 import (
    CubatureControls,
    DpParams,
    SweepRow,
    SweepSpec,
    block_structure_check,
    conditional_independence,
    det_scan,
    expected_info,
    reparam_scalar_info,
)

SEPARABLE = DpParams(0, 0, 1, 0, 1, 0.5, 0, -2)
TIGHT = CubatureControls(rel_tol=1e-10, abs_tol=1e-13, max_evals=4_000_000)

# upper triangle of the 30-digit reference at SEPARABLE
EINFO_ORACLE = {
    (0, 0): 1.2153114136079862172, (0, 1): 0.0,
    (0, 2): 0.64101441311615863854, (0, 3): 0.0, (0, 4): 0.0,
    (0, 5): 2.0664401185827942346, (0, 6): 0.0,
    (0, 7): -0.48145095715903043776,
    (1, 1): 1.0, (1, 2): 0.0, (1, 3): 1.0613342513300511096,
    (1, 4): 0.0, (1, 5): 0.0, (1, 6): 2.1226685026601022193, (1, 7): 0.0,
    (2, 2): 0.83754185374131515243, (2, 3): 0.0, (2, 4): 0.0,
    (2, 5): 0.74580023999176654666, (2, 6): 0.0,
    (2, 7): -0.24674403587344307817,
    (3, 3): 1.9492862131291363469, (3, 4): 0.0, (3, 5): 0.0,
    (3, 6): 1.8985724262582726938, (3, 7): 0.0,
    (4, 4): 0.5, (4, 5): 0.0, (4, 6): 0.0, (4, 7): 0.0,
    (5, 5): 3.7510753833132535561, (5, 6): 0.0,
    (5, 7): -0.82355572406730890299,
    (6, 6): 4.6583905069484902564, (6, 7): 0.0,
    (7, 7): 0.19083616845401234259,
}

SINGULAR = DpParams(0, 0, 1, 0, 1, 0, 0, 0)


def test_expected_info_oracle_matrix():
    info = expected_info(SEPARABLE, tol=TIGHT)
    assert info.kind == "expected"
    m = info.matrix
    for (r, c), want in EINFO_ORACLE.items():
        err = abs(m[r, c] - want) / max(1.0, abs(want))
        assert err < 1e-10, f"entry ({r}, {c}): {m[r, c]} vs {want}"
        assert m[c, r] == m[r, c]


def test_expected_info_positive_definite_at_regular_point():
    m = expected_info(DpParams(0, 0, 1, 0.6, 1, 2, 3, 1)).matrix
    eigs = np.linalg.eigvalsh(m)
    assert eigs[0] > 0.0


def test_singular_point_structure():
    m = expected_info(SINGULAR).matrix
    assert m[7, 7] == 0.0
    assert_allclose(m[:, 7], 0.0, atol=1e-15)
    assert abs(np.linalg.det(m)) < 1e-10


def test_mirror_invariance():
    dp = DpParams(0, 0, 1, 0.4, 1, 1.3, -0.7, 0.9)
    flipped = replace(dp, alpha1=-dp.alpha1, alpha2=-dp.alpha2)
    signs = np.array([-1.0, -1.0, 1.0, 1.0, 1.0, -1.0, -1.0, 1.0])
    m = expected_info(dp).matrix
    mf = expected_info(flipped).matrix
    assert np.array_equal(mf, m * np.outer(signs, signs))


def test_tau_block_shrinks_determinant():
    # appending the tau row/col cannot grow the determinant past the
    # Schur bound det(7x7) * i88
    for dp in (DpParams(0, 0, 1, 0.6, 1, 2, 3, 0),
               DpParams(0, 0, 1, 0, 1, 1.5, 0, 0)):
        m = expected_info(dp).matrix
        det8 = np.linalg.det(m)
        det7 = np.linalg.det(m[:7, :7])
        assert det8 <= det7 * m[7, 7] + 1e-10


def test_reparam_scalar_info():
    assert reparam_scalar_info(1.0, 2.0) == 0.25     # psi = w^2 at w = 1
    assert reparam_scalar_info(1.0, 1.0) == 1.0
    assert reparam_scalar_info(1.0, 4.0) == 0.0625   # psi = w^2 at w = 2
    with pytest.raises(ValueError):
        reparam_scalar_info(1.0, 0.0)


def test_conditional_independence():
    assert conditional_independence(DpParams(0, 0, 1, 0, 1, 0, 3, 0))
    assert not conditional_independence(DpParams(0, 0, 1, 0, 1, 1, 3, 0))
    assert not conditional_independence(DpParams(0, 0, 1, 0.5, 1, 0, 3, 0))


def test_block_structure():
    ok, off = block_structure_check(DpParams(0, 0, 1, 0, 1, 0, 2, 0))
    assert ok and off < 1e-6
    ok, off = block_structure_check(DpParams(0, 0, 1, 0, 1, 0, 2, 1.5))
    assert ok and off < 1e-6
    with pytest.raises(ValueError):
        block_structure_check(DpParams(0, 0, 1, 0.4, 1, 0, 2, 0))
    with pytest.raises(ValueError):
        block_structure_check(DpParams(0, 0, 1, 0, 1, 1, 2, 0))


def test_sweep_spec_validation():
    base = DpParams(0, 0, 1, 0, 1, 1, 0, 0)
    with pytest.raises(ValueError):
        SweepSpec("omega12", (0.0, 0.5), base)
    with pytest.raises(ValueError):
        SweepSpec("alpha1", (), base)
    with pytest.raises(ValueError):
        SweepSpec("alpha1", (0.0, 1.0, 0.5), base)
    with pytest.raises(ValueError):
        SweepSpec("omega11", (1.0, 0.5, -1.0), base)
    spec = SweepSpec("tau", (2.0, 1.0, 0.0), base)    # descending is fine
    assert spec.grid == (2.0, 1.0, 0.0)
    assert spec.dp_at(1.0) == replace(base, tau=1.0)


def test_det_scan_rows_in_grid_order():
    base = DpParams(0, 0, 1, 0, 1, 1, 0, 0)
    spec = SweepSpec("alpha1", (0.5, 1.5, 3.0), base)
    rows = det_scan(spec)
    assert [r.param_value for r in rows] == [0.5, 1.5, 3.0]
    assert all(isinstance(r, SweepRow) and r.converged for r in rows)
    assert all(math.isfinite(r.min_eigenvalue) for r in rows)
    # shrinking slant shrinks the determinant; this grid keeps the values
    # far above the default-tolerance noise floor so the order is robust
    assert rows[0].det < rows[1].det < rows[2].det


def test_det_scan_exact_zero_on_grid():
    base = DpParams(0, 0, 1, 0, 1, 1, 0, 0)
    spec = SweepSpec("alpha1", (-0.1, 0.0, 0.1), base)
    rows = det_scan(spec)
    assert rows[1].det == 0.0
    assert rows[1].min_eigenvalue == pytest.approx(0.0, abs=1e-12)
    # mirror symmetry of the scan is exact
    assert rows[0].det == rows[2].det


def test_det_scan_thread_pool_matches_serial(monkeypatch):
    base = DpParams(0, 0, 1, 0.4, 1, 1.0, 2.0, 0)
    spec = SweepSpec("alpha1", (-1.0, 0.0, 1.0, 2.0), base)
    monkeypatch.delenv("ESN2_THREADS", raising=False)
    serial = det_scan(spec)
    monkeypatch.setenv("ESN2_THREADS", "3")
    threaded = det_scan(spec)
    assert serial == threaded


def test_det_scan_bad_thread_env(monkeypatch):
    base = DpParams(0, 0, 1, 0, 1, 1, 0, 0)
    spec = SweepSpec("alpha1", (0.5,), base)
    monkeypatch.setenv("ESN2_THREADS", "many")
    with pytest.raises(ValueError):
        det_scan(spec)
    monkeypatch.setenv("ESN2_THREADS", "-2")
    with pytest.raises(ValueError):
        det_scan(spec)


def test_det_scan_records_cubature_failure():
    base = DpParams(0, 0, 1, 0.6, 1, 2, 3, 1)
    spec = SweepSpec("alpha1", (2.0,), base)
    starved = CubatureControls(rel_tol=1e-6, abs_tol=1e-30, max_evals=2000)
    rows = det_scan(spec, tol=starved)
    assert len(rows) == 1
    assert not rows[0].converged
    assert math.isnan(rows[0].det)


def test_expected_info_random_points_well_conditioned():
    rng = philox(20260815, 42)
    for _ in range(3):
        dp = random_dp(rng)
        m = expected_info(dp).matrix
        assert np.all(np.isfinite(m))
        assert np.all(np.diag(m) >= 0.0)
