"""Independent verifiers used as test oracles.

Brute-force grid search over small feasible sets, random-sampling
dominance checks, and statistical falsification tests for the spectral
inequalities and matrix-calculus identities the solvers rely on. Nothing
here is used by the solvers themselves.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .fractional import ConstraintSet
from .matops import ContractViolation

GRID_GUARD = 10**8
LOEWNER_TOL = 1e-9


@dataclass(frozen=True)
class GridSpec:
    points_per_dim: int
    dims: int
    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if self.dims > 4:
            raise ContractViolation("grid search supports at most 4 dimensions")
        if len(self.bounds) != self.dims:
            raise ContractViolation("one (lo, hi) interval required per dimension")
        if self.points_per_dim ** self.dims > GRID_GUARD:
            raise ContractViolation("grid exceeds the evaluation guard")

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, self.points_per_dim) for lo, hi in self.bounds]


def grid_search_gee(objective, cs: ConstraintSet, grid: GridSpec,
                    vectorized: bool = False):
    """Exhaustive argmax of `objective` over the feasible grid points.

    Ties break toward the lexicographically first grid point. With
    `vectorized=True` the objective receives an (n, dims) array and must
    return n values; otherwise it is called point by point.
    """
    axes = grid.axes()
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, grid.dims)
    feasible = mesh[:, 0] >= -1e-15
    for j in range(1, grid.dims):
        feasible &= mesh[:, j] >= -1e-15
    for cap in cs.caps:
        feasible &= mesh @ cap.weights <= cap.cap + 1e-12 * max(1.0, cap.cap)
    pts = mesh[feasible]
    if pts.shape[0] == 0:
        raise ContractViolation("no feasible grid point")
    if vectorized:
        vals = np.asarray(objective(pts), dtype=float)
    else:
        vals = np.array([objective(p) for p in pts], dtype=float)
    best = int(np.argmax(vals))  # argmax keeps the first maximizer
    return pts[best].copy(), float(vals[best])


def random_feasible_points(cs: ConstraintSet, n: int,
                           rng: np.random.Generator,
                           scale: float = 1.0) -> np.ndarray:
    """Rejection-free sampler: random rays scaled back inside every cap."""
    x = rng.uniform(0.0, scale, size=(n, cs.dimension))
    for cap in cs.caps:
        load = x @ cap.weights
        over = load > cap.cap
        x[over] *= (cap.cap / load[over])[:, None] * rng.uniform(
            0.5, 1.0, size=int(np.sum(over)))[:, None]
    return x


def _random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _eigvals_desc(m: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(m)[::-1]


def check_lemma1(t: np.ndarray, r: np.ndarray, n_rot: int = 100,
                 rng: np.random.Generator | None = None) -> bool:
    """tr(T R) is bounded below by the opposite-ordered spectral pairing."""
    if rng is None:
        rng = np.random.default_rng(0)
    lt = _eigvals_desc(t)
    lr = _eigvals_desc(r)
    bound = float(lt @ lr[::-1])
    mats = [r]
    for _ in range(n_rot):
        u = _random_unitary(len(lr), rng)
        mats.append(u @ r @ u.conj().T)
    # unitary conjugation keeps the spectrum, so the bound is shared
    for m in mats:
        m = 0.5 * (m + m.conj().T)
        if float(np.trace(t @ m).real) < bound - 1e-9 * max(1.0, abs(bound)):
            return False
    return True


def check_lemma2(t: np.ndarray, r: np.ndarray, n_rot: int = 100,
                 rng: np.random.Generator | None = None) -> bool:
    """log|I + T^{-1}R| is bounded below by the same-ordered pairing."""
    if rng is None:
        rng = np.random.default_rng(0)
    lt = _eigvals_desc(t)
    lr = np.clip(_eigvals_desc(r), 0.0, None)
    if np.any(lt <= 0):
        raise ContractViolation("T must be positive definite")
    bound = float(np.sum(np.log(1.0 + lr / lt)))
    n = len(lt)
    for k in range(n_rot + 1):
        if k == 0:
            m = r
        else:
            u = _random_unitary(n, rng)
            m = u @ r @ u.conj().T
        m = 0.5 * (m + m.conj().T)
        _, ld = np.linalg.slogdet(np.eye(n) + np.linalg.solve(t, m))
        if float(ld) < bound - 1e-9 * max(1.0, abs(bound)):
            return False
    return True


def check_lemma3(g, dim: int = 3, n_trials: int = 100,
                 rng: np.random.Generator | None = None) -> bool:
    """A sign-flip-invariant concave objective is maximized on diagonals."""
    if rng is None:
        rng = np.random.default_rng(0)
    for _ in range(n_trials):
        a = (rng.standard_normal((dim, dim))
             + 1j * rng.standard_normal((dim, dim)))
        x = a @ a.conj().T  # PSD keeps log-det style objectives in-domain
        for i in range(dim):
            gamma = np.ones(dim)
            gamma[i] = -1.0
            flipped = x * gamma[:, None] * gamma[None, :]
            if abs(g(flipped) - g(x)) > 1e-9 * max(1.0, abs(g(x))):
                raise ContractViolation("objective lacks sign-flip symmetry")
        diag_x = np.diag(np.diag(x))
        if g(diag_x) < g(x) - 1e-9 * max(1.0, abs(g(x))):
            return False
    return True


def check_lemma6(m1: np.ndarray, m2: np.ndarray, x: float,
                 h: float = 1e-6) -> bool:
    """d/dx log|M1 + x M2| equals tr((M1 + x M2)^{-1} M2).

    The step is kept well inside the distance to the nearest singular
    point (min eigenvalue over the perturbation norm), otherwise the
    truncation error of the difference quotient dominates near-singular
    instances; Richardson extrapolation removes the leading h^2 term.
    """
    m = m1 + x * m2
    min_eig = float(np.min(np.linalg.eigvalsh(m)))
    if min_eig <= 0:
        raise ContractViolation("M1 + x M2 must be positive definite")
    analytic = float(np.trace(np.linalg.solve(m, m2)).real)

    def ld(y):
        _, v = np.linalg.slogdet(m1 + y * m2)
        return float(v)

    radius = min_eig / max(float(np.linalg.norm(m2, 2)), 1e-300)
    step = min(h, 1e-3 * radius)

    def central(s):
        return (ld(x + s) - ld(x - s)) / (2.0 * s)

    fd = (4.0 * central(step / 2.0) - central(step)) / 3.0
    # the derivative is a sum of eigen-contributions that may cancel;
    # accuracy is judged against their magnitude, not the cancelled sum
    scale = max(abs(analytic),
                float(np.linalg.norm(np.linalg.solve(m, m2))), 1e-6)
    return abs(analytic - fd) <= 1e-5 * scale


def _min_eig_gap(f, a, b) -> float:
    mid = f(0.5 * (a + b)) - 0.5 * f(a) - 0.5 * f(b)
    mid = 0.5 * (mid + mid.conj().T)
    return float(np.min(np.linalg.eigvalsh(mid)))


def check_lemma4_5(n_trials: int = 100, dim: int = 3,
                   rng: np.random.Generator | None = None) -> bool:
    """Midpoint matrix-concavity of the two AF-gain maps (Löwner order).

    Checks X -> (I + M X^{-1} M^H)^{-1} over random HPD pairs and
    L -> L (nu I + D L)^{-1} over random diagonal PSD pairs.
    """
    if rng is None:
        rng = np.random.default_rng(0)

    def rand_hpd():
        a = (rng.standard_normal((dim, dim))
             + 1j * rng.standard_normal((dim, dim)))
        return a @ a.conj().T + 0.1 * np.eye(dim)

    for _ in range(n_trials):
        m = (rng.standard_normal((dim, dim))
             + 1j * rng.standard_normal((dim, dim)))

        def f_inv(x):
            return np.linalg.inv(np.eye(dim) + m @ np.linalg.solve(x, m.conj().T))

        if _min_eig_gap(f_inv, rand_hpd(), rand_hpd()) < -LOEWNER_TOL:
            return False

        nu = rng.uniform(0.0, 2.0)
        ell = rng.uniform(0.05, 2.0, size=dim)

        def f_diag(lam_mat):
            lam = np.diag(lam_mat).real
            return np.diag(lam / (nu + ell * lam))

        a = np.diag(rng.uniform(0.01, 3.0, size=dim))
        b = np.diag(rng.uniform(0.01, 3.0, size=dim))
        if _min_eig_gap(f_diag, a, b) < -LOEWNER_TOL:
            return False
    return True
