"""Potential-type kernels and their dyadic envelopes.

A kernel on a finite space is an (n, n) matrix of nonnegative values, finite
off the diagonal; +inf may appear only at K(x, x). Built-in families:

* ``frac_rho``: K(x, y) = dist(x, y)^(alpha - n_dim); the diagonal is +inf
  unless a finite ``diag`` override is supplied.
* ``ball_volume``: K(x, y) = mu(B(x, dist(x, y)))^(gamma - 1) with the strict
  ball centered at the first argument, hence possibly asymmetric. The
  diagonal is mu({x})^(gamma - 1) when x carries mass and +inf otherwise.
* ``ball_volume_closed``: same with the closed ball.
* ``matrix``: caller-supplied values.

The dyadic envelope phi assigns to a cube Q the largest kernel value over
pairs drawn from the containing ball B(Q) that are at least c * radius(B(Q))
apart, with c = delta^2 / (5 a0^2). Three estimates tie phi back to the
kernel and are checked exactly on the finite space, with constant
C_K = k1(k2)^2 where k1 is the brute-forced growth constant at scale factor
k2 = 20 a0^4 / delta^2:

1. phi(Q) <= C_K * K(x, y) for every such separated pair in B(Q);
2. phi(ancestor) <= C_K * phi(descendant) along cube ancestry;
3. a cube whose ball holds no separated pair has exactly one set-equal
   child, so an undefined envelope never multiplies a nonempty shell.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dyadic import Cube, DyadicSystem
from .errors import (
    BadExponents,
    BadParams,
    EmptyBallMass,
    EstimateViolated,
    Unbounded,
)
from .policy import CheckReport, leq
from .space import PointMeasure, QuasiMetricSpace


@dataclass(eq=False)
class Kernel:
    kind: str
    params: dict
    matrix: np.ndarray = field(repr=False)
    symmetric: bool

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def build_kernel(space: QuasiMetricSpace, mu: PointMeasure | None, kind: str,
                 **params) -> Kernel:
    n = space.n
    d = space.dist
    if kind == "frac_rho":
        alpha = float(params.get("alpha", np.nan))
        n_dim = float(params.get("n_dim", np.nan))
        if not (np.isfinite(alpha) and np.isfinite(n_dim) and 0 < alpha < n_dim):
            raise BadExponents("need 0 < alpha < n_dim", alpha=alpha, n_dim=n_dim)
        with np.errstate(divide="ignore"):
            K = np.where(d > 0, d, np.nan) ** (alpha - n_dim)
        diag = params.get("diag")
        if diag is None:
            np.fill_diagonal(K, np.inf)
        else:
            dv = float(diag)
            if not dv >= 0.0:
                raise BadParams("diagonal override must be nonnegative",
                                diag=dv)
            np.fill_diagonal(K, dv)
    elif kind in ("ball_volume", "ball_volume_closed"):
        if mu is None:
            raise BadParams("ball volume kernels need a reference measure")
        gamma = float(params.get("gamma", np.nan))
        if not (np.isfinite(gamma) and 0 < gamma <= 1):
            raise BadExponents("need gamma in (0, 1]", gamma=gamma)
        closed = kind.endswith("closed")
        K = np.empty((n, n))
        for x in range(n):
            for y in range(n):
                if x == y:
                    continue
                r = d[x, y]
                inside = d[x] <= r if closed else d[x] < r
                mass = float(np.sum(mu.masses[inside]))
                if mass == 0.0:
                    raise EmptyBallMass(x=x, y=y, radius=float(r))
                K[x, y] = mass ** (gamma - 1.0)
        for x in range(n):
            mx = float(mu.masses[x])
            K[x, x] = mx ** (gamma - 1.0) if mx > 0 else np.inf
    elif kind == "matrix":
        K = np.asarray(params.get("values"), dtype=float)
        if K.ndim != 2 or K.shape != (n, n):
            raise BadParams("kernel matrix must be n-by-n", shape=K.shape)
        if np.any(np.isnan(K)) or np.any(K < 0):
            raise BadParams("kernel values must be nonnegative and not NaN")
        off = ~np.eye(n, dtype=bool)
        if np.any(np.isinf(K[off])):
            x, y = np.argwhere(np.isinf(K) & off)[0]
            raise BadParams("off-diagonal kernel values must be finite",
                            x=int(x), y=int(y))
    else:
        raise BadParams("unknown kernel kind", kind=kind)
    return Kernel(kind=kind, params=dict(params), matrix=K,
                  symmetric=bool(np.array_equal(K, K.T)))


def growth_scale_factor(a0: float, delta: float) -> float:
    return 20.0 * a0**4 / delta**2


def pair_threshold(a0: float, delta: float) -> float:
    return delta**2 / (5.0 * a0**2)


def kernel_growth_constant(kernel: Kernel, space: QuasiMetricSpace,
                           k2: float) -> float:
    """Smallest k1 with K(x, y) <= k1 * K(x', y) whenever the moved pair is
    off-diagonal and dist(x', y) <= k2 * dist(x, y), over both slots.

    Zero kernel values are allowed only against zero: a positive value
    comparable to a zero one means no finite k1 exists.
    """
    d = space.dist
    K = kernel.matrix
    n = space.n
    k1 = 1.0
    off = ~np.eye(n, dtype=bool)
    for y in range(n):
        col_ok = off[:, y]
        num = K[:, y]
        limit = k2 * d[:, y]
        for x in range(n):
            if x == y or num[x] == 0.0:
                continue
            reachable = col_ok & (d[:, y] <= limit[x])
            den = num[reachable]
            if np.any(den == 0.0):
                xp = int(np.flatnonzero(reachable)[np.argwhere(den == 0.0)[0][0]])
                raise Unbounded("positive value comparable to a zero one",
                                x=x, y=y, x_moved=xp)
            if den.size:
                k1 = max(k1, float(num[x] / den.min()))
    if not kernel.symmetric:
        for x in range(n):
            row_ok = off[x, :]
            num = K[x, :]
            limit = k2 * d[x, :]
            for y in range(n):
                if x == y or num[y] == 0.0:
                    continue
                reachable = row_ok & (d[x, :] <= limit[y])
                den = num[reachable]
                if np.any(den == 0.0):
                    yp = int(np.flatnonzero(reachable)[np.argwhere(den == 0.0)[0][0]])
                    raise Unbounded("positive value comparable to a zero one",
                                    x=x, y=y, y_moved=yp)
                if den.size:
                    k1 = max(k1, float(num[y] / den.min()))
    return k1


def kernel_bound_constant(kernel: Kernel, space: QuasiMetricSpace,
                          delta: float) -> tuple[float, float, float]:
    """Return (C_K, k1, k2) with C_K = k1^2 at the calibrated scale factor."""
    k2 = growth_scale_factor(space.a0, delta)
    k1 = kernel_growth_constant(kernel, space, k2)
    return k1 * k1, k1, k2


# ---------------------------------------------------------------------------
# dyadic envelope
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class PhiTable:
    """Envelope values per cube; ``defined`` is False when the containing
    ball holds no separated pair (the value is then 0 and must never be
    paired with a nonempty shell)."""

    threshold: float
    values: dict[tuple[int, int], float]
    defined: dict[tuple[int, int], bool]

    def of(self, cube: Cube) -> float:
        return self.values[(cube.k, cube.center)]

    def is_defined(self, cube: Cube) -> bool:
        return self.defined[(cube.k, cube.center)]


def phi_table(kernel: Kernel, sys: DyadicSystem) -> PhiTable:
    space = sys.space
    d = space.dist
    K = kernel.matrix
    c = pair_threshold(space.a0, sys.delta)
    values: dict[tuple[int, int], float] = {}
    defined: dict[tuple[int, int], bool] = {}
    for cube in sys.all_cubes():
        r = sys.outer_ball_radius(cube.k)
        ball = np.flatnonzero(d[cube.center] < r)
        sep = d[np.ix_(ball, ball)] >= c * r
        key = (cube.k, cube.center)
        if sep.any():
            values[key] = float(K[np.ix_(ball, ball)][sep].max())
            defined[key] = True
        else:
            values[key] = 0.0
            defined[key] = False
    return PhiTable(threshold=c, values=values, defined=defined)


@dataclass
class EstimateReport:
    k1: float
    k2: float
    C_K: float
    reports: list[CheckReport]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.reports)


def check_kernel_estimates(kernel: Kernel, sys: DyadicSystem,
                           phi: PhiTable | None = None,
                           strict: bool = True) -> EstimateReport:
    """Check the three envelope estimates exactly on the finite space."""
    space = sys.space
    d = space.dist
    K = kernel.matrix
    if phi is None:
        phi = phi_table(kernel, sys)
    C_K, k1, k2 = kernel_bound_constant(kernel, space, sys.delta)
    reports: list[CheckReport] = []

    def emit(name: str, ok: bool, witness: dict | None = None, **details):
        rep = CheckReport(name=name, status="pass" if ok else "fail",
                          strict_mode=sys.strict_delta, witness=witness,
                          details=details)
        reports.append(rep)
        if strict and not ok:
            raise EstimateViolated(f"kernel estimate '{name}' failed",
                                   **(witness or {}))

    # (1) the envelope never exceeds C_K times any separated pair value
    worst = 0.0
    witness = None
    for cube in sys.all_cubes():
        if not phi.is_defined(cube):
            continue
        r = sys.outer_ball_radius(cube.k)
        ball = np.flatnonzero(d[cube.center] < r)
        sep = d[np.ix_(ball, ball)] >= phi.threshold * r
        vals = K[np.ix_(ball, ball)][sep]
        v = phi.of(cube)
        low = float(vals.min())
        ratio = np.inf if low == 0.0 and v > 0 else (v / low if low > 0 else 0.0)
        if ratio > worst:
            worst = ratio
            witness = {"k": cube.k, "center": cube.center,
                       "phi": v, "min_pair_value": low}
        if not leq(v, C_K * low):
            emit("bounded_on_separated_pairs", False,
                 {"k": cube.k, "center": cube.center, "phi": v,
                  "min_pair_value": low, "C_K": C_K})
            break
    else:
        emit("bounded_on_separated_pairs", True, worst_ratio=worst, C_K=C_K,
             worst_case=witness)

    # (2) ancestors never exceed C_K times descendants
    done = False
    worst2 = 0.0
    for cube in sys.all_cubes():
        if not phi.is_defined(cube) or done:
            continue
        walk = cube
        while walk.k > sys.k_min and not done:
            walk = sys.parent(walk)
            if not phi.is_defined(walk):
                continue
            ratio = phi.of(walk) / phi.of(cube) if phi.of(cube) > 0 else (
                np.inf if phi.of(walk) > 0 else 0.0)
            worst2 = max(worst2, ratio)
            if not leq(phi.of(walk), C_K * phi.of(cube)):
                emit("bounded_along_ancestry", False,
                     {"ancestor": (walk.k, walk.center),
                      "descendant": (cube.k, cube.center),
                      "phi_ancestor": phi.of(walk),
                      "phi_descendant": phi.of(cube), "C_K": C_K})
                done = True
    if not done:
        emit("bounded_along_ancestry", True, worst_ratio=worst2, C_K=C_K)

    # (3) a cube with no separated pair collapses onto its only child
    ok = True
    witness = None
    seen_vacuous = False
    for cube in sys.all_cubes():
        if phi.is_defined(cube) or cube.k == sys.k_max:
            continue
        seen_vacuous = True
        kids = sys.children(cube)
        if len(kids) != 1 or kids[0].members != cube.members:
            ok = False
            witness = {"k": cube.k, "center": cube.center,
                       "children": len(kids)}
            break
    if ok and not seen_vacuous:
        reports.append(CheckReport("vacuous_cubes_collapse", "vacuous",
                                   sys.strict_delta))
    else:
        emit("vacuous_cubes_collapse", ok, witness)

    return EstimateReport(k1=k1, k2=k2, C_K=C_K, reports=reports)
