"""Per-observation expected Fisher information and the singularity scans.

The 8x8 matrix is assembled entry by entry from the closed-form and
cubature expectations of the standardized model; each entry is the
negative expectation of the matching second derivative of the
log-likelihood.  Also here: the scalar reparameterization rule, the
conditional-independence and block-structure predicates, and grid
sweeps of the determinant used to map where the matrix degenerates.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .expectations import CubatureNotConverged, expectation_set
from .likelihood import InfoMatrix
from .model import DpParams, _alpha_star_sq, _lam, validate
from .special_fns import zeta

_SWEEPABLE = ("alpha1", "alpha2", "tau")

# sign pattern of each coordinate under the mirror alpha -> -alpha:
# xi and alpha rows change sign, scale and tau rows do not
_FLIP_SIGNS = np.array([-1.0, -1.0, 1.0, 1.0, 1.0, -1.0, -1.0, 1.0])


def _assemble(dp, es):
    """Fill the information matrix from an expectation set."""
    o11, o22 = dp.omega11, dp.omega22
    o1, o2 = math.sqrt(o11), math.sqrt(o22)
    rt11, rt22 = o11 * o1, o22 * o2
    lam = _lam(dp)
    u = 1.0 / (1.0 - lam * lam)
    a1, a2, tau = dp.alpha1, dp.alpha2, dp.tau
    astar2 = _alpha_star_sq(lam, a1, a2)
    den = math.sqrt(1.0 + astar2)

    ez1, ez2 = es.e_zeta1, es.e_zeta2
    mz1, mz2 = es.e_z1, es.e_z2
    mz1q, mz2q, mz12 = es.e_z1sq, es.e_z2sq, es.e_z1z2
    z1_zeta1, z2_zeta1 = es.e_z1_zeta1, es.e_z2_zeta1
    z1_zeta2, z2_zeta2 = es.e_z1_zeta2, es.e_z2_zeta2
    z1q_zeta2, z2q_zeta2 = es.e_z1sq_zeta2, es.e_z2sq_zeta2
    z12_zeta2 = es.e_z1z2_zeta2

    m = np.empty((8, 8))

    m[0, 0] = (u - a1 ** 2 * ez2) / o11
    m[0, 1] = -(lam * u + a1 * a2 * ez2) / (o1 * o2)
    m[0, 2] = (-(lam * mz2 - mz1) * u ** 2 / rt11
               - (a1 / (2.0 * rt11))
               * ((a1 * a2 * lam * tau / den) * ez2 + a1 * z1_zeta2)
               - (a1 / (2.0 * rt11)) * ez1)
    m[0, 3] = (2.0 * lam * (lam * mz2 - mz1) * u ** 2 / (o11 * o2)
               + mz2 * u / (o11 * o2)
               + (a1 ** 2 * a2 * tau / (o11 * o2 * den)) * ez2)
    m[0, 4] = (-lam * (mz2 - mz1 * lam) * u ** 2 / (o22 * o1)
               - (a1 / (2.0 * o22 * o1))
               * ((a1 * a2 * lam * tau / den) * ez2 + a2 * z2_zeta2))
    m[0, 5] = ((a1 / o1)
               * (((a1 + lam * a2) * tau / den) * ez2 + z1_zeta2)
               + ez1 / o1)
    m[0, 6] = (a1 / o1) * (((a2 + lam * a1) * tau / den) * ez2 + z2_zeta2)
    m[0, 7] = (a1 * den / o1) * ez2

    m[1, 1] = (u - a2 ** 2 * ez2) / o22
    m[1, 2] = (-lam * (mz1 - mz2 * lam) * u ** 2 / (o11 * o2)
               - (a2 / (2.0 * o11 * o2))
               * ((a1 * a2 * lam * tau / den) * ez2 + a1 * z1_zeta2))
    m[1, 3] = (2.0 * lam * (lam * mz1 - mz2) * u ** 2 / (o22 * o1)
               + mz1 * u / (o22 * o1)
               + (a2 ** 2 * a1 * tau / (o22 * o1 * den)) * ez2)
    m[1, 4] = (-(lam * mz1 - mz2) * u ** 2 / rt22
               - (a2 / (2.0 * rt22))
               * ((a1 * a2 * lam * tau / den) * ez2 + a2 * z2_zeta2)
               - (a2 / (2.0 * rt22)) * ez1)
    m[1, 5] = (a2 / o2) * (((a1 + lam * a2) * tau / den) * ez2 + z1_zeta2)
    m[1, 6] = ((a2 / o2)
               * (((a2 + lam * a1) * tau / den) * ez2 + z2_zeta2)
               + ez1 / o2)
    m[1, 7] = (a2 * den / o2) * ez2

    m[2, 2] = (-(lam ** 2 - mz1q + 2.0 * mz12 * lam) * u / o11 ** 2
               - (4.0 * lam ** 3 * mz12 - 2.0 * lam ** 2 * mz1q
                  - lam ** 2 * mz2q) * u ** 2 / o11 ** 2
               + lam ** 4 * (mz1q + mz2q - 2.0 * mz12 * lam)
               * u ** 3 / o11 ** 2
               - 0.5 / o11 ** 2
               - lam ** 4 * u ** 2 / (2.0 * o11 ** 2)
               - (1.0 / (4.0 * o11 ** 2))
               * ((3.0 * a1 * a2 * tau * lam / den) * ez1
                  - (a1 ** 2 * a2 ** 2 * tau * lam ** 2 / den ** 3) * ez1
                  + 3.0 * a1 * z1_zeta1)
               - (1.0 / (4.0 * o11 ** 2))
               * ((a1 ** 2 * a2 ** 2 * tau ** 2 * lam ** 2 / den ** 2) * ez2
                  + a1 ** 2 * z1q_zeta2
                  + (2.0 * a1 ** 2 * a2 * tau * lam / den) * z1_zeta2))
    m[2, 3] = ((lam + mz12) * u / (rt11 * o2)
               - (2.0 * lam * mz1q + lam * mz2q - 5.0 * lam ** 2 * mz12
                  - lam ** 3) * u ** 2 / (rt11 * o2)
               - 2.0 * lam ** 3 * (mz1q + mz2q - 2.0 * mz12 * lam)
               * u ** 3 / (rt11 * o2)
               - (a1 ** 2 * a2 ** 2 * tau * lam
                  / (2.0 * rt11 * o2 * den ** 3)
                  - a1 * a2 * tau / (2.0 * rt11 * o2 * den)) * ez1
               + (a1 * a2 * tau / (2.0 * rt11 * o2 * den))
               * ((a1 * a2 * lam * tau / den) * ez2 + a1 * z1_zeta2))
    m[2, 4] = (-(lam ** 4 + 6.0 * lam ** 3 * mz12 - 2.0 * lam ** 2 * mz1q
                 - 2.0 * lam ** 2 * mz2q) * u ** 2 / (2.0 * o11 * o22)
               - lam ** 2 * u / (2.0 * o11 * o22)
               - lam * mz12 * u / (o11 * o22)
               + lam ** 4 * (mz1q + mz2q - 2.0 * mz12 * lam)
               * u ** 3 / (o11 * o22)
               - (a1 * a2 * lam * tau / (4.0 * o11 * o22 * den))
               * (1.0 - a1 * a2 * lam / (1.0 + astar2)) * ez1
               - (a1 * a2 / (4.0 * o11 * o22))
               * ((a1 * a2 * lam ** 2 * tau ** 2 / den ** 2) * ez2
                  + (a2 * lam * tau / den) * z2_zeta2
                  + (a1 * lam * tau / den) * z1_zeta2
                  + z12_zeta2))
    m[2, 5] = (-(1.0 / (2.0 * o11))
               * ((a1 * a2 * lam * (a2 * lam + a1) * tau / den ** 3) * ez1
                  - (a2 * lam * tau / den) * ez1
                  - z1_zeta1)
               + (1.0 / (2.0 * o11))
               * ((a1 * a2 * lam * tau ** 2 * (a2 * lam + a1) / den ** 2)
                  * ez2
                  + (a1 * a2 * lam * tau / den) * z1_zeta2
                  + (a1 * (a2 * lam + a1) * tau / den) * z1_zeta2
                  + a1 * z1q_zeta2))
    m[2, 6] = (-(1.0 / (2.0 * o11))
               * (a1 * a2 * lam * (a1 * lam + a2) * tau / den ** 3
                  - a1 * lam * tau / den) * ez1
               + (1.0 / (2.0 * o11))
               * ((a1 * a2 * lam * tau ** 2 * (a2 + a1 * lam) / den ** 2)
                  * ez2
                  + (a1 * a2 * lam * tau / den) * z2_zeta2
                  + (a1 * (a2 + a1 * lam) * tau / den) * z1_zeta2
                  + a1 * z12_zeta2))
    m[2, 7] = ((a1 * a2 * lam / (2.0 * o11 * den)) * ez1
               + (den / (2.0 * o11))
               * ((a1 * a2 * lam * tau / den) * ez2 + a1 * z1_zeta2))

    m[3, 3] = (-u / (o11 * o22)
               - (6.0 * lam * mz12 - mz1q - mz2q + 2.0 * lam ** 2)
               * u ** 2 / (o11 * o22)
               + 4.0 * lam ** 2 * (mz1q + mz2q - 2.0 * mz12 * lam)
               * u ** 3 / (o11 * o22)
               - (a1 ** 2 * a2 ** 2 * tau / (o11 * o22 * den ** 2))
               * (tau * ez2 - ez1 / den))
    m[3, 4] = ((lam + mz12) * u / (rt22 * o1)
               - (2.0 * lam * mz2q + lam * mz1q - 5.0 * lam ** 2 * mz12
                  - lam ** 3) * u ** 2 / (rt22 * o1)
               - 2.0 * lam ** 3 * (mz1q + mz2q - 2.0 * mz12 * lam)
               * u ** 3 / (rt22 * o1)
               - (a1 ** 2 * a2 ** 2 * tau * lam
                  / (2.0 * rt22 * o1 * den ** 3)
                  - a1 * a2 * tau / (2.0 * rt22 * o1 * den)) * ez1
               + (a1 * a2 * tau / (2.0 * rt22 * o1 * den))
               * ((a1 * a2 * lam * tau / den) * ez2 + a2 * z2_zeta2))
    m[3, 5] = (-(a2 * tau / (o1 * o2 * den))
               * (1.0 - a1 * (a2 * lam + a1) / den ** 2) * ez1
               - (a1 * a2 * tau / (o1 * o2 * den))
               * (((a1 + lam * a2) * tau / den) * ez2 + z1_zeta2))
    m[3, 6] = (-(a1 * tau / (o1 * o2 * den))
               * (1.0 - a2 * (a1 * lam + a2) / den ** 2) * ez1
               - (a1 * a2 * tau / (o1 * o2 * den))
               * (((a2 + lam * a1) * tau / den) * ez2 + z2_zeta2))
    m[3, 7] = -(a1 * a2 / (o1 * o2)) * (ez1 / den + tau * ez2)

    m[4, 4] = (-(lam ** 2 - mz2q + 2.0 * mz12 * lam) * u / o22 ** 2
               - (4.0 * lam ** 3 * mz12 - 2.0 * lam ** 2 * mz2q
                  - lam ** 2 * mz1q) * u ** 2 / o22 ** 2
               + lam ** 4 * (mz1q + mz2q - 2.0 * mz12 * lam)
               * u ** 3 / o22 ** 2
               - 0.5 / o22 ** 2
               - lam ** 4 * u ** 2 / (2.0 * o22 ** 2)
               - (1.0 / (4.0 * o22 ** 2))
               * ((3.0 * a1 * a2 * tau * lam / den) * ez1
                  - (a1 ** 2 * a2 ** 2 * tau * lam ** 2 / den ** 3) * ez1
                  + 3.0 * a2 * z2_zeta1)
               - (1.0 / (4.0 * o22 ** 2))
               * ((a1 ** 2 * a2 ** 2 * tau ** 2 * lam ** 2 / den ** 2) * ez2
                  + a2 ** 2 * z2q_zeta2
                  + (2.0 * a1 * a2 ** 2 * tau * lam / den) * z2_zeta2))
    m[4, 5] = (-(1.0 / (2.0 * o22))
               * (a1 * a2 * lam * (a2 * lam + a1) * tau / den ** 3
                  - a2 * lam * tau / den) * ez1
               + (1.0 / (2.0 * o22))
               * ((a1 * a2 * lam * tau ** 2 * (a1 + a2 * lam) / den ** 2)
                  * ez2
                  + (a1 * a2 * lam * tau / den) * z1_zeta2
                  + (a2 * (a1 + a2 * lam) * tau / den) * z2_zeta2
                  + a2 * z12_zeta2))
    m[4, 6] = (-(1.0 / (2.0 * o22))
               * ((a1 * a2 * lam * (a1 * lam + a2) * tau / den ** 3) * ez1
                  - (a1 * lam * tau / den) * ez1
                  - z2_zeta1)
               + (1.0 / (2.0 * o22))
               * ((a1 * a2 * lam * tau ** 2 * (a1 * lam + a2) / den ** 2)
                  * ez2
                  + (a1 * a2 * lam * tau / den) * z2_zeta2
                  + (a2 * (a1 * lam + a2) * tau / den) * z2_zeta2
                  + a2 * z2q_zeta2))
    m[4, 7] = ((a1 * a2 * lam / (2.0 * o22 * den)) * ez1
               + (den / (2.0 * o22))
               * ((a1 * a2 * lam * tau / den) * ez2 + a2 * z2_zeta2))

    m[5, 5] = (-(tau / den - (a2 * lam + a1) ** 2 * tau / den ** 3) * ez1
               - ((a1 + lam * a2) ** 2 * tau ** 2 / den ** 2) * ez2
               - z1q_zeta2
               - (2.0 * (a1 + lam * a2) * tau / den) * z1_zeta2)
    m[5, 6] = (-(lam * tau / den
                 - (a2 + lam * a1) * (a1 + lam * a2) * tau / den ** 3) * ez1
               - ((a1 + lam * a2) * (a2 + lam * a1) * tau ** 2 / den ** 2)
               * ez2
               - ((a1 + lam * a2) * tau / den) * z2_zeta2
               - ((a2 + lam * a1) * tau / den) * z1_zeta2
               - z12_zeta2)
    m[5, 7] = (-((a1 + lam * a2) / den) * ez1
               - (((a1 + lam * a2) * tau / den) * ez2 + z1_zeta2) * den)

    m[6, 6] = (-(tau / den - (a1 * lam + a2) ** 2 * tau / den ** 3) * ez1
               - ((a2 + lam * a1) ** 2 * tau ** 2 / den ** 2) * ez2
               - z2q_zeta2
               - (2.0 * (a2 + lam * a1) * tau / den) * z2_zeta2)
    m[6, 7] = (-((a2 + lam * a1) / den) * ez1
               - (((a2 + lam * a1) * tau / den) * ez2 + z2_zeta2) * den)

    m[7, 7] = -(1.0 + astar2) * ez2 + zeta(2, tau)

    iu = np.triu_indices(8, k=1)
    m[(iu[1], iu[0])] = m[iu]
    return m


def expected_info(dp, tol=None):
    """Expected information for one observation at dp.

    Raises
    ------
    CubatureNotConverged
        When the underlying a-term cubature fails.
    """
    validate(dp)
    es = expectation_set(dp, tol)
    return InfoMatrix(matrix=_assemble(dp, es), kind="expected")


def reparam_scalar_info(info_value, dpsi_dnu):
    """Map a scalar information value through psi(nu): divide by psi'^2."""
    if dpsi_dnu == 0.0:
        raise ValueError("reparameterization derivative must be nonzero")
    return info_value / dpsi_dnu ** 2


def conditional_independence(dp):
    """Whether the two components are conditionally independent.

    Holds exactly when the off-diagonal scale entry and the product
    alpha1 * alpha2 are both zero; zero is tested against a 1e-14
    relative scale so round-tripped parameters still qualify.
    """
    validate(dp)
    scale_tol = 1e-14 * math.sqrt(dp.omega11 * dp.omega22)
    alpha_tol = 1e-14 * max(1.0, dp.alpha1 ** 2, dp.alpha2 ** 2)
    return (abs(dp.omega12) <= scale_tol
            and abs(dp.alpha1 * dp.alpha2) <= alpha_tol)


def block_structure_check(dp, tol=None):
    """Verify the information factorizes when component 1 is pure Gaussian.

    Requires omega12 = 0 and alpha1 = 0, where the distribution splits
    into a univariate normal times a univariate extended skew-normal.
    Rows and columns are reordered into (xi1, omega11 | xi2, omega22,
    alpha2, tau) and the largest off-block entry is reported.
    """
    validate(dp)
    scale_tol = 1e-14 * math.sqrt(dp.omega11 * dp.omega22)
    if abs(dp.omega12) > scale_tol:
        raise ValueError("block structure requires omega12 = 0")
    if abs(dp.alpha1) > 1e-14 * max(1.0, abs(dp.alpha2)):
        raise ValueError("block structure requires alpha1 = 0")
    m = expected_info(dp, tol).matrix
    order = [0, 2, 1, 4, 6, 7]
    sub = m[np.ix_(order, order)]
    max_offblock = float(np.max(np.abs(sub[:2, 2:])))
    return max_offblock < 1e-6, max_offblock


@dataclass(frozen=True)
class SweepSpec:
    """One-parameter grid sweep around a base parameter point."""
    sweep_param: str
    grid: tuple
    base: DpParams

    def __post_init__(self):
        if self.sweep_param not in _SWEEPABLE:
            raise ValueError(
                f"sweep_param must be one of {_SWEEPABLE}, "
                f"got {self.sweep_param!r}")
        grid = tuple(float(g) for g in np.atleast_1d(self.grid))
        if not grid:
            raise ValueError("grid must be nonempty")
        diffs = np.diff(grid)
        if len(grid) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ValueError("grid must be strictly monotone")
        object.__setattr__(self, "grid", grid)
        for g in grid:
            validate(self.dp_at(g))

    def dp_at(self, value):
        return replace(self.base, **{self.sweep_param: float(value)})


@dataclass(frozen=True)
class SweepRow:
    """Determinant diagnostics at one grid point."""
    param_value: float
    det: float
    min_eigenvalue: float
    converged: bool


def _det_and_mineig(m):
    """Determinant and smallest eigenvalue of a symmetric matrix.

    The sweeps walk straight into near-singular territory where the
    determinant ranges over hundreds of orders of magnitude, mostly
    through row scale.  A raw eigenvalue product cannot sign anything
    below eps * ||m||^8, so the matrix is symmetrically equilibrated to
    unit diagonal first: det(m) = det(D m D) * prod|m_ii| with
    D = diag(1/sqrt|m_ii|), accumulated in log space.
    """
    eigs = np.linalg.eigvalsh(m)
    min_eig = float(eigs[0])
    diag = np.diag(m)
    if np.any(diag == 0.0):
        # zero diagonal in a PSD-up-to-noise matrix means a zero row
        return 0.0, min_eig
    d = np.sqrt(np.abs(diag))
    scaled = np.linalg.eigvalsh(m / np.outer(d, d))
    if np.any(scaled == 0.0):
        return 0.0, min_eig
    sign = -1.0 if np.count_nonzero(scaled < 0.0) % 2 else 1.0
    logdet = float(np.sum(np.log(np.abs(scaled)))
                   + np.sum(np.log(np.abs(diag))))
    return sign * math.exp(logdet), min_eig


def _scan_row(spec, value, tol):
    dp = spec.dp_at(value)
    try:
        info = expected_info(dp, tol)
    except CubatureNotConverged:
        return SweepRow(param_value=float(value), det=float("nan"),
                        min_eigenvalue=float("nan"), converged=False)
    m = info.matrix
    # mirroring alpha flips the sign pattern below but not the spectrum;
    # conjugating back before the eigensolve makes mirrored sweep points
    # bit-identical instead of merely equal up to rounding
    if dp.alpha1 < 0.0 or (dp.alpha1 == 0.0 and dp.alpha2 < 0.0):
        m = m * np.outer(_FLIP_SIGNS, _FLIP_SIGNS)
    det, min_eig = _det_and_mineig(m)
    return SweepRow(param_value=float(value), det=det,
                    min_eigenvalue=min_eig, converged=True)


def _thread_count(njobs):
    raw = os.environ.get("ESN2_THREADS", "0").strip()
    try:
        requested = int(raw)
    except ValueError:
        raise ValueError(f"ESN2_THREADS must be an integer, got {raw!r}")
    if requested < 0:
        raise ValueError("ESN2_THREADS must be >= 0")
    if requested == 0:
        requested = os.cpu_count() or 1
    return max(1, min(requested, njobs))


def det_scan(spec, tol=None):
    """Determinant and smallest eigenvalue at every grid point.

    Points are independent; ESN2_THREADS > 1 evaluates them in a thread
    pool (0 means one per core).  Rows always come back in grid order,
    and a cubature failure marks its row converged=False without
    stopping the scan.
    """
    workers = _thread_count(len(spec.grid))
    if workers == 1:
        return [_scan_row(spec, g, tol) for g in spec.grid]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda g: _scan_row(spec, g, tol), spec.grid))
