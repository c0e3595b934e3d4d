"""Independent oracles for the analytic decay rates.

Two brute-force routes to the stationary distribution: an exact solve of
the walk clamped to a finite grid (power iteration with Aitken
extrapolation, with a subtraction-free direct elimination for small grids)
and a plain Monte Carlo simulation of the reflected chain.  Log-linear
fits of the resulting tail curves furnish empirical decay rates; none of
this code consults the level-set analysis it is used to check.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

try:  # the jitted stepping loop is ~20x faster; the numpy path is identical
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

from .asymptotics import periodicity
from .errors import ConvergenceError, KernelError, NoisyWindowError
from .model import ModelSpec, _truncated_transitions

RESIDUAL_TOL = 1e-10
BURN_IN_FRACTION = 5  # burn-in is horizon / BURN_IN_FRACTION
FIT_WINDOW = (0.2, 0.7)  # fractions of the truncation size


@dataclass(frozen=True)
class TruncatedChain:
    """Stationary distribution of the walk clamped to {0..N}^2.

    Jumps that would leave the grid are clamped to the nearest grid point,
    which keeps the kernel stochastic and confines the bias to an edge band
    of width one maximum jump; fit windows exclude that band.
    """

    N: int
    stationary: np.ndarray  # shape (N+1, N+1)
    residual: float
    method: str
    iterations: int
    overflow_policy: str = "clamp-to-edge"

    def marginal_tail(self, k: int, fixed_level: Optional[int] = None) -> np.ndarray:
        """tail[n] = P(L_k >= n, L_other = fixed) or the plain marginal tail."""
        axis = k - 1
        if fixed_level is None:
            line = self.stationary.sum(axis=1 - axis)
        else:
            line = self.stationary[:, fixed_level] if k == 1 else self.stationary[fixed_level, :]
        return np.cumsum(line[::-1])[::-1]


def _transition_matrix(model: ModelSpec, N: int) -> sp.csr_matrix:
    rows, cols, probs = _truncated_transitions(model, N)
    n = (N + 1) * (N + 1)
    return sp.csr_matrix((probs, (rows, cols)), shape=(n, n))


def _gth_stationary(P: sp.csr_matrix) -> np.ndarray:
    """Subtraction-free direct elimination; entrywise accurate but O(n^3)."""
    T = P.toarray()
    n = T.shape[0]
    norms = np.empty(n)
    for k in range(n - 1, 0, -1):
        s = T[k, :k].sum()
        norms[k] = s
        T[k, :k] /= s
        T[:k, :k] += np.outer(T[:k, k], T[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = (pi[:k] * T[:k, k]).sum() / norms[k]
    return pi / pi.sum()


def _power_stationary(
    P: sp.csr_matrix, residual_tol: float, max_iter: int
) -> tuple[np.ndarray, float, int]:
    """Left fixed vector by power iteration with safeguarded Aitken steps.

    Iterates past the l1 residual target until the entrywise relative step
    stagnates, so that deep-tail cells are converged in relative terms and
    usable for slope fits.
    """
    PT = P.T.tocsr()
    n = P.shape[0]
    v = np.full(n, 1.0 / n)
    snap0 = snap1 = None
    it = 0
    floor = 1e-280
    while it < max_iter:
        w = PT @ v
        it += 1
        res = np.abs(w - v).sum()
        if res < residual_tol:
            sig = v > floor
            rel = np.abs(w[sig] - v[sig]) / v[sig]
            if rel.size == 0 or rel.max() < 1e-12:
                v = w
                break
        if it % 64 == 0:
            if snap0 is not None and snap1 is not None:
                d1 = w - snap1
                d0 = snap1 - snap0
                den = d1 - d0
                safe = np.abs(den) > 1e-300
                acc = w.copy()
                acc[safe] = w[safe] - d1[safe] ** 2 / den[safe]
                np.clip(acc, 0.0, None, out=acc)
                total = acc.sum()
                if total > 0.0:
                    acc /= total
                    if np.abs(PT @ acc - acc).sum() < res:
                        w = acc
            snap0, snap1 = snap1, w
        v = w
    else:
        raise ConvergenceError(
            f"power iteration reached {max_iter} iterations at residual {res:.3e}"
        )
    v = np.clip(v, 0.0, None)
    v /= v.sum()
    res = np.abs(PT @ v - v).sum()
    return v, res, it


def solve_truncated(
    model: ModelSpec,
    N: int,
    method: str = "auto",
    residual_tol: float = RESIDUAL_TOL,
    max_iter: int = 1_000_000,
) -> TruncatedChain:
    """Stationary distribution of the clamped walk on {0..N}^2.

    ``method`` is "power", "gth" or "auto"; auto runs power iteration and
    falls back to the direct elimination for N <= 60 if it stalls.
    """
    if N < 20:
        raise KernelError("truncation size below 20 is too biased to be useful")
    P = _transition_matrix(model, N)
    if method == "gth":
        pi = _gth_stationary(P)
        res = float(np.abs(P.T @ pi - pi).sum())
        return TruncatedChain(N, pi.reshape(N + 1, N + 1), res, "gth", 1)
    try:
        pi, res, it = _power_stationary(P, residual_tol, max_iter)
        return TruncatedChain(N, pi.reshape(N + 1, N + 1), res, "power", it)
    except ConvergenceError:
        if method == "auto" and N <= 60:
            pi = _gth_stationary(P)
            res = float(np.abs(P.T @ pi - pi).sum())
            return TruncatedChain(N, pi.reshape(N + 1, N + 1), res, "gth-fallback", 1)
        raise


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares slope of a log tail curve over a fit window."""

    mode: str
    window: tuple[float, float]
    slope: float
    r_squared: float
    stderr: float
    n_points: int


def _loglinear_fit(xs: np.ndarray, logys: np.ndarray) -> tuple[float, float, float]:
    n = xs.size
    A = np.column_stack([xs, np.ones(n)])
    coef, *_ = np.linalg.lstsq(A, logys, rcond=None)
    fitted = A @ coef
    ss_res = float(((logys - fitted) ** 2).sum())
    ss_tot = float(((logys - logys.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    dof = max(n - 2, 1)
    sxx = float(((xs - xs.mean()) ** 2).sum())
    stderr = math.sqrt(ss_res / dof / sxx) if sxx > 0 else math.inf
    return float(coef[0]), r2, stderr


def fit_decay(
    chain: TruncatedChain,
    coord: Optional[int] = None,
    fixed_level: Optional[int] = None,
    direction: Optional[tuple[Fraction, Fraction]] = None,
    window: tuple[float, float] = FIT_WINDOW,
    min_r2: float = 0.99,
) -> SlopeFit:
    """Decay-rate fit from a solved chain.

    Coordinate mode fits log P(L_k >= n, L_other = fixed_level) against n
    (or the plain marginal when fixed_level is None).  Direction mode
    aggregates the stationary mass over half-plane tail sets along the
    given rational direction, on a grid whose spacing is the direction's
    arithmetic span, then fits against the threshold.  The window fractions
    keep the fit away from both the clamped edge and the near-origin
    transient.  Raises NoisyWindowError below the r-squared requirement.
    """
    N = chain.N
    if (coord is None) == (direction is None):
        raise ValueError("pass exactly one of coord or direction")
    if coord is not None:
        tail = chain.marginal_tail(coord, fixed_level)
        n_lo = max(1, math.ceil(window[0] * N))
        n_hi = math.floor(window[1] * N)
        levels = np.arange(n_lo, n_hi + 1)
        vals = tail[levels]
        good = vals > 0.0
        levels, vals = levels[good], vals[good]
        mode = f"coordinate {coord}" + (
            f" at other = {fixed_level}" if fixed_level is not None else " marginal"
        )
        if levels.size < 5:
            raise NoisyWindowError(f"{mode}: too few positive tail points in the window")
        slope, r2, stderr = _loglinear_fit(levels.astype(float), np.log(vals))
        fit = SlopeFit(mode, (float(n_lo), float(n_hi)), slope, r2, stderr, levels.size)
    else:
        raw1, raw2 = Fraction(direction[0]), Fraction(direction[1])
        norm = math.hypot(float(raw1), float(raw2))
        c = (float(raw1) / norm, float(raw2) / norm)
        delta_unit = float(periodicity(raw1, raw2).delta) / norm
        side = N + 1
        xs, ys = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
        scores = c[0] * xs.ravel() + c[1] * ys.ravel()
        bins = np.rint(scores / delta_unit).astype(np.int64)
        mass = np.bincount(bins, weights=chain.stationary.ravel())
        tail = np.cumsum(mass[::-1])[::-1]
        x_hi = window[1] * N * max(c)
        x_lo = window[0] * N * max(c)
        j_lo = max(1, math.ceil(x_lo / delta_unit))
        j_hi = min(tail.size - 1, math.floor(x_hi / delta_unit))
        js = np.arange(j_lo, j_hi + 1)
        vals = tail[js]
        good = vals > 0.0
        js, vals = js[good], vals[good]
        mode = f"direction ({raw1}, {raw2})"
        if js.size < 5:
            raise NoisyWindowError(f"{mode}: too few positive tail points in the window")
        slope, r2, stderr = _loglinear_fit(js * delta_unit, np.log(vals))
        fit = SlopeFit(mode, (j_lo * delta_unit, j_hi * delta_unit), slope, r2, stderr, js.size)
    if fit.r_squared < min_r2:
        raise NoisyWindowError(
            f"{fit.mode}: r-squared {fit.r_squared:.4f} below {min_r2} (WINDOW_TOO_NOISY)"
        )
    return fit


@dataclass(frozen=True)
class SimResult:
    """Tail counts of a Monte Carlo run of the reflected walk.

    ``tail_counts_k[n]`` counts post-burn-in steps, summed over
    replications, at which the k-th coordinate was at least n.  Counts are
    nonincreasing in the level; merging replications is a plain sum, so the
    result is independent of replication order.
    """

    replications: int
    horizon: int
    burn_in: int
    seed: int
    tail_counts_1: np.ndarray
    tail_counts_2: np.ndarray

    @property
    def samples(self) -> int:
        return self.replications * (self.horizon - self.burn_in)

    def tail_probability(self, k: int) -> np.ndarray:
        counts = self.tail_counts_1 if k == 1 else self.tail_counts_2
        return counts / self.samples


def _kernel_tables(model: ModelSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    kernels = [model.interior, model.face1, model.face2, model.origin]
    width = max(len(k.atoms) for k in kernels)
    cum = np.full((4, width), 2.0)  # padding and the final atom catch all u < 1
    dxs = np.zeros((4, width), dtype=np.int64)
    dys = np.zeros((4, width), dtype=np.int64)
    for i, kernel in enumerate(kernels):
        probs = [p for _, _, p in kernel.atoms]
        cum[i, : len(probs)] = np.cumsum(probs)
        cum[i, len(probs) - 1] = 2.0
        dxs[i, : len(probs)] = [dx for dx, _, _ in kernel.atoms]
        dys[i, : len(probs)] = [dy for _, dy, _ in kernel.atoms]
    return cum, dxs, dys


if _HAVE_NUMBA:

    @njit(cache=True)
    def _step_chunk(x, y, U, cum, dxs, dys, hist1, hist2, start_step, burn_in, cap):
        n_rep, span = U.shape
        for t in range(span):
            for r in range(n_rep):
                if x[r] > 0:
                    reg = 0 if y[r] > 0 else 1
                else:
                    reg = 2 if y[r] > 0 else 3
                u = U[r, t]
                k = 0
                while u > cum[reg, k]:
                    k += 1
                x[r] += dxs[reg, k]
                y[r] += dys[reg, k]
            if start_step + t >= burn_in:
                for r in range(n_rep):
                    a = x[r] if x[r] < cap else cap - 1
                    b = y[r] if y[r] < cap else cap - 1
                    hist1[a] += 1
                    hist2[b] += 1

else:  # pragma: no cover - exercised only without numba

    def _step_chunk(x, y, U, cum, dxs, dys, hist1, hist2, start_step, burn_in, cap):
        for t in range(U.shape[1]):
            region = (x == 0) * 2 + (y == 0)
            idx = (U[:, t, None] > cum[region]).sum(axis=1)
            x += dxs[region, idx]
            y += dys[region, idx]
            if start_step + t >= burn_in:
                h1 = np.bincount(np.minimum(x, cap - 1))
                h2 = np.bincount(np.minimum(y, cap - 1))
                hist1[: h1.size] += h1
                hist2[: h2.size] += h2


def simulate(
    model: ModelSpec,
    replications: int,
    horizon: int,
    seed: int,
    tail_cap: int = 1024,
    chunk: int = 16384,
) -> SimResult:
    """Simulate the reflected walk and accumulate time-average tail counts.

    Each replication owns an independent PCG64 stream spawned from
    SeedSequence(seed) (child r drives replication r); one uniform draw per
    step selects the jump atom by inverse transform against the kernel of
    the current region.  All replications start at the origin and are
    advanced in lockstep; counting starts after a burn-in of horizon / 5.
    The result is a deterministic function of (seed, replications, horizon),
    identical with and without the jitted stepping loop.
    """
    burn_in = horizon // BURN_IN_FRACTION
    root = np.random.SeedSequence(seed)
    gens = [np.random.Generator(np.random.PCG64(child)) for child in root.spawn(replications)]
    cum, dxs, dys = _kernel_tables(model)
    x = np.zeros(replications, dtype=np.int64)
    y = np.zeros(replications, dtype=np.int64)
    hist1 = np.zeros(tail_cap, dtype=np.int64)
    hist2 = np.zeros(tail_cap, dtype=np.int64)
    done = 0
    U = np.empty((replications, chunk))
    while done < horizon:
        span = min(chunk, horizon - done)
        for r, gen in enumerate(gens):
            U[r, :span] = gen.random(span)
        _step_chunk(x, y, U[:, :span], cum, dxs, dys, hist1, hist2, done, burn_in, tail_cap)
        done += span
    tail1 = np.cumsum(hist1[::-1])[::-1]
    tail2 = np.cumsum(hist2[::-1])[::-1]
    return SimResult(
        replications=replications,
        horizon=horizon,
        burn_in=burn_in,
        seed=seed,
        tail_counts_1=tail1,
        tail_counts_2=tail2,
    )


def fit_sim_decay(result: SimResult, k: int, min_count: int = 200, min_r2: float = 0.99) -> SlopeFit:
    """Log-linear decay fit of a simulated marginal tail curve.

    Uses levels from 2 up to the last level still backed by ``min_count``
    raw hits, so the fit never leans on the noisy extreme tail.
    """
    counts = result.tail_counts_1 if k == 1 else result.tail_counts_2
    usable = np.nonzero(counts >= min_count)[0]
    if usable.size == 0 or usable[-1] < 6:
        raise NoisyWindowError(f"simulated coordinate {k} tail too short to fit")
    n_hi = int(usable[-1])
    levels = np.arange(2, n_hi + 1)
    probs = counts[levels] / result.samples
    slope, r2, stderr = _loglinear_fit(levels.astype(float), np.log(probs))
    fit = SlopeFit(
        f"simulated coordinate {k}", (2.0, float(n_hi)), slope, r2, stderr, levels.size
    )
    if r2 < min_r2:
        raise NoisyWindowError(
            f"simulated coordinate {k}: r-squared {r2:.4f} below {min_r2} (WINDOW_TOO_NOISY)"
        )
    return fit


def export_tail_csv(path: str, rows: Iterable[tuple[int, float, str]]) -> None:
    """Write tail curves as CSV with columns level, tail_probability, source."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "tail_probability", "source"])
        for level, prob, source in rows:
            writer.writerow([level, f"{prob:.12g}", source])


def tail_rows(
    chain: Optional[TruncatedChain] = None,
    sim: Optional[SimResult] = None,
    k: int = 1,
    max_level: Optional[int] = None,
) -> list[tuple[int, float, str]]:
    rows: list[tuple[int, float, str]] = []
    if chain is not None:
        tail = chain.marginal_tail(k)
        hi = min(len(tail), (max_level or len(tail)))
        rows.extend((n, float(tail[n]), "truncated") for n in range(hi))
    if sim is not None:
        tail = sim.tail_probability(k)
        hi = min(len(tail), (max_level or len(tail)))
        rows.extend((n, float(tail[n]), "montecarlo") for n in range(hi) if tail[n] > 0)
    return rows
