"""Direct and dyadic model operators.

The direct operator integrates the kernel against a weighted density,

    T(f dsigma)(x) = sum_y K(x, y) f(y) sigma({y}),

and its adjoint uses the transposed kernel. The dyadic model operator is
tied to a cube system generalized by the measure pair (sigma, omega): off
the diagonal K is replaced by the envelope of the finest cube containing
both points, and the diagonal keeps K(x, x) only at joint atoms,

    T_D(f dsigma)(x) = sum_{y != x} phi(Q(x, y)) f(y) sigma({y})
                       + [x joint atom] K(x, x) f(x) sigma({x}),

so the matrix diagonal is positive only where both measures charge the
point. An equivalent telescoping form runs over one cube chain: with
A_k(x) the sigma-integral of f over the generation-k cube containing x,

    T_D(f dsigma)(x) = sum_k phi(Q^k(x)) (A_k(x) - A_{k+1}(x)) + diagonal.

The shifted variant T_D^m widens each shell to m generations; cubes past
the finest generation mean the point cube {x}. Cube integrals are computed
hierarchically (a parent's sum adds its children's sums in center order,
the finest generation sums members in id order), which makes
A_{k+1} <= A_k >= f(x) sigma({x}) hold exactly in floating point for
f >= 0 and lets the sandwich T_D <= T_D^m be asserted with no tolerance.

Everywhere a +inf diagonal meets a zero density the product counts as zero;
a +inf against a nonzero density propagates as a signed infinity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dyadic import GeneralizedSystem
from .errors import (
    BadM,
    BadParams,
    DualityViolated,
    EquivalenceViolated,
    FormMismatch,
    PointCubeViolated,
    PropertyViolation,
    SandwichViolated,
)
from .kernel import Kernel, PhiTable, kernel_bound_constant, phi_table
from .policy import TOLERANCES, CheckReport, close, guard, guard_vec
from .space import PointMeasure


def _as_density(f, n: int) -> np.ndarray:
    v = np.asarray(f, dtype=float)
    if v.shape != (n,):
        raise BadParams("density must have one value per point", shape=v.shape)
    if not np.all(np.isfinite(v)):
        raise BadParams("density values must be finite")
    return v


def weighted_apply(matrix: np.ndarray, f, measure: PointMeasure) -> np.ndarray:
    """Integrate a kernel matrix against f d(measure), inf * 0 = 0."""
    n = matrix.shape[0]
    g = _as_density(f, n) * measure.masses
    off = matrix.copy()
    np.fill_diagonal(off, 0.0)
    out = off @ g
    diag = matrix.diagonal()
    with np.errstate(invalid="ignore"):
        dterm = diag * g
    return out + np.where(g == 0.0, 0.0, dterm)


def pairing(u: np.ndarray, v: np.ndarray, w: PointMeasure) -> float:
    """sum u * v * w with any zero factor silencing an infinite partner."""
    with np.errstate(invalid="ignore"):
        t = u * v * w.masses
    t = np.where((u == 0.0) | (v == 0.0) | (w.masses == 0.0), 0.0, t)
    return float(np.sum(t))


def apply_direct(kernel: Kernel, f, sigma: PointMeasure) -> np.ndarray:
    return weighted_apply(kernel.matrix, f, sigma)


def apply_direct_adjoint(kernel: Kernel, f, sigma: PointMeasure) -> np.ndarray:
    return weighted_apply(kernel.matrix.T, f, sigma)


@dataclass(eq=False)
class PotentialOperator:
    """Direct kernel operator f -> sum_y K(., y) f(y) sigma({y}).

    The adjoint integrates against omega instead; for the symmetric kernels
    built here the two share a matrix, but both are kept explicit so the
    norm machinery can treat any operator pair uniformly.
    """

    kernel: Kernel
    sigma: PointMeasure
    omega: PointMeasure

    def apply(self, f) -> np.ndarray:
        return weighted_apply(self.kernel.matrix, f, self.sigma)

    def apply_adjoint(self, h) -> np.ndarray:
        return weighted_apply(self.kernel.matrix.T, h, self.omega)


@dataclass(eq=False)
class DyadicOperator:
    """Dyadic model operator bound to a generalized system and its measures.

    apply integrates against gen.sigma and apply_adjoint against gen.omega;
    the matrix is symmetric, so the adjoint is the same operator with the
    other measure inside. The diagonal is positive only at joint atoms.
    """

    kernel: Kernel
    gen: GeneralizedSystem
    phi: PhiTable
    C_K: float
    k1: float
    k2: float
    matrix: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def system(self):
        return self.gen.base

    @property
    def sigma(self) -> PointMeasure:
        return self.gen.sigma

    @property
    def omega(self) -> PointMeasure:
        return self.gen.omega

    def apply(self, f) -> np.ndarray:
        return weighted_apply(self.matrix, f, self.gen.sigma)

    def apply_adjoint(self, h) -> np.ndarray:
        return weighted_apply(self.matrix.T, h, self.gen.omega)


def build_dyadic_operator(kernel: Kernel, gen: GeneralizedSystem,
                          phi: PhiTable | None = None) -> DyadicOperator:
    system = gen.base
    space = system.space
    if kernel.n != space.n:
        raise BadParams("kernel and system disagree on the point count",
                        kernel_n=kernel.n, space_n=space.n)
    if phi is None:
        phi = phi_table(kernel, system)
    C_K, k1, k2 = kernel_bound_constant(kernel, space, system.delta)
    n = space.n
    M = np.empty((n, n))
    for x in range(n):
        M[x, x] = kernel.matrix[x, x] if gen.is_joint_atom(x) else 0.0
        for y in range(x + 1, n):
            q = system.smallest_common_cube(x, y)
            if not phi.is_defined(q):
                raise PropertyViolation(
                    "envelope undefined on a cube separating two points",
                    x=x, y=y, k=q.k, center=q.center)
            M[x, y] = M[y, x] = phi.of(q)
    return DyadicOperator(kernel=kernel, gen=gen, phi=phi,
                          C_K=C_K, k1=k1, k2=k2, matrix=M)


# ---------------------------------------------------------------------------
# telescoping form
# ---------------------------------------------------------------------------

def cube_sums(system, point_vals: np.ndarray) -> dict[tuple[int, int], float]:
    """Per-cube totals; a parent's total adds its children's in center order.

    Finest-generation cubes sum their members in id order. The ordered
    recursion makes every child total <= its parent total, and every total
    at least each of its member values, exactly in floating point when the
    values are nonnegative.
    """
    sums: dict[tuple[int, int], float] = {}
    for k in range(system.k_max, system.k_min - 1, -1):
        for cube in system.generations[k]:
            if k == system.k_max:
                s = 0.0
                for x in cube.members:
                    s += float(point_vals[x])
            else:
                s = 0.0
                for child in system.children(cube):
                    s += sums[(child.k, child.center)]
            sums[(k, cube.center)] = s
    return sums


def apply_dyadic_partition(op: DyadicOperator, f, m: int = 1) -> np.ndarray:
    """Telescoping form of the dyadic operator with shells m generations deep."""
    if not isinstance(m, int) or m < 1:
        raise BadM(m=m)
    system = op.system
    n = op.n
    g = _as_density(f, n) * op.gen.sigma.masses
    sums = cube_sums(system, g)
    gens = list(system.generation_range())
    G = len(gens)
    out = np.empty(n)
    diag = op.matrix.diagonal()
    for x in range(n):
        chain = [sums[(k, int(system.ancestor[k - system.k_min, x]))] for k in gens]
        total = 0.0
        for i, k in enumerate(gens):
            j = i + m
            a_far = chain[j] if j < G else g[x]
            cube = system.containing_cube(k, x)
            total += op.phi.values[(k, cube.center)] * (chain[i] - a_far)
        if g[x] == 0.0:
            out[x] = total
        else:
            with np.errstate(invalid="ignore"):
                out[x] = total + diag[x] * g[x]
    return out


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

def _vec_close(a: np.ndarray, b: np.ndarray, rel: float) -> tuple[bool, int, float]:
    """Componentwise closeness treating matching infinities as equal."""
    worst = 0.0
    worst_i = -1
    for i in range(a.shape[0]):
        ai, bi = float(a[i]), float(b[i])
        if np.isinf(ai) or np.isinf(bi):
            if ai == bi:
                continue
            return False, i, np.inf
        scale = max(abs(ai), abs(bi), 1.0)
        err = abs(ai - bi) / scale
        if err > worst:
            worst, worst_i = err, i
        if err > rel:
            return False, i, err
    return True, worst_i, worst


def check_forms_agree(op: DyadicOperator, strict: bool = True,
                      rel: float = TOLERANCES["dual_form_rel"]) -> CheckReport:
    """Kernel form and telescoping form agree on every basis density."""
    n = op.n
    worst = 0.0
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        a = op.apply(e)
        b = apply_dyadic_partition(op, e, m=1)
        ok, i, err = _vec_close(a, b, rel)
        worst = max(worst, 0.0 if np.isinf(err) else err)
        if not ok:
            witness = {"basis": j, "x": i, "kernel_form": float(a[i]),
                       "telescoped": float(b[i])}
            if strict:
                raise FormMismatch("operator forms disagree", **witness)
            return CheckReport("forms_agree", "fail",
                               op.system.strict_delta, witness)
    return CheckReport("forms_agree", "pass", op.system.strict_delta,
                       details={"worst_rel_err": worst, "rel": rel})


def check_self_adjoint(op: DyadicOperator, seed: int = 0, trials: int = 20,
                       strict: bool = True,
                       rel: float = TOLERANCES["duality_rel"]) -> CheckReport:
    """<T_D(g dsigma), h>_omega == <g, T_D(h domega)>_sigma on random pairs."""
    rng = np.random.default_rng(np.random.SeedSequence([0xAD01, seed]))
    sigma, omega = op.gen.sigma, op.gen.omega
    n = op.n
    worst = 0.0
    for t in range(trials):
        g = rng.uniform(0.0, 1.0, n)
        h = rng.uniform(0.0, 1.0, n)
        lhs = pairing(op.apply(g), h, omega)
        rhs = pairing(g, op.apply_adjoint(h), sigma)
        if np.isinf(lhs) or np.isinf(rhs):
            if lhs == rhs:
                continue
            witness = {"trial": t, "lhs": lhs, "rhs": rhs}
            if strict:
                raise DualityViolated("pairing mismatch", **witness)
            return CheckReport("self_adjoint", "fail",
                               op.system.strict_delta, witness)
        if not close(lhs, rhs, rel):
            witness = {"trial": t, "lhs": lhs, "rhs": rhs}
            if strict:
                raise DualityViolated("pairing mismatch", **witness)
            return CheckReport("self_adjoint", "fail",
                               op.system.strict_delta, witness)
        scale = max(abs(lhs), abs(rhs), 1.0)
        worst = max(worst, abs(lhs - rhs) / scale)
    return CheckReport("self_adjoint", "pass", op.system.strict_delta,
                       details={"trials": trials, "worst_rel_err": worst})


def check_shifted_sandwich(op: DyadicOperator, f, m: int,
                           strict: bool = True) -> CheckReport:
    """T_D <= T_D^m (no tolerance) and T_D^m <= C_K m T_D (roundoff guard)."""
    fv = _as_density(f, op.n)
    if np.any(fv < 0):
        raise BadParams("sandwich check needs a nonnegative density")
    base = apply_dyadic_partition(op, fv, m=1)
    shifted = apply_dyadic_partition(op, fv, m=m)
    low_ok = bool(np.all(shifted >= base))
    cap = op.C_K * m * base
    high_ok = bool(np.all(shifted <= guard_vec(cap)))
    if low_ok and high_ok:
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(base > 0, shifted / base, 1.0)
        ratio = float(np.nanmax(np.where(np.isfinite(ratio), ratio, 1.0)))
        return CheckReport("shifted_sandwich", "pass", op.system.strict_delta,
                           details={"m": m, "cap": op.C_K * m,
                                    "worst_ratio": ratio})
    side = "lower" if not low_ok else "upper"
    bad = np.flatnonzero(~(shifted >= base) if not low_ok
                         else ~(shifted <= guard_vec(cap)))
    x = int(bad[0])
    witness = {"m": m, "side": side, "x": x, "base": float(base[x]),
               "shifted": float(shifted[x]), "cap": op.C_K * m}
    if strict:
        raise SandwichViolated(f"{side} sandwich bound failed", **witness)
    return CheckReport("shifted_sandwich", "fail", op.system.strict_delta, witness)


def check_dyadic_below_direct(op: DyadicOperator,
                              strict: bool = True) -> CheckReport:
    """Entrywise phi(Q(x,y)) <= C_K K(x,y) and <= C_K K(y,x).

    This makes T_D(f dsigma) <= C_K T(f dsigma) and <= C_K T*(f dsigma)
    pointwise for every nonnegative density at once.
    """
    K = op.kernel.matrix
    n = op.n
    worst = 0.0
    witness = None
    for x in range(n):
        for y in range(n):
            if x == y:
                continue
            v = op.matrix[x, y]
            for target, label in ((K[x, y], "direct"), (K[y, x], "adjoint")):
                ratio = v / target if target > 0 else (np.inf if v > 0 else 0.0)
                if ratio > worst:
                    worst = ratio
                    witness = {"x": x, "y": y, "against": label}
                if not v <= guard(op.C_K * target):
                    bad = {"x": x, "y": y, "against": label, "phi": float(v),
                           "kernel": float(target), "C_K": op.C_K}
                    if strict:
                        raise EquivalenceViolated(
                            "dyadic kernel exceeds the direct one", **bad)
                    return CheckReport("dyadic_below_direct", "fail",
                                       op.system.strict_delta, bad)
    return CheckReport("dyadic_below_direct", "pass", op.system.strict_delta,
                       details={"worst_ratio": worst, "C_K": op.C_K,
                                "worst_at": witness})


def check_direct_below_family(ops: list[DyadicOperator] | tuple[DyadicOperator, ...],
                              strict: bool = True) -> CheckReport:
    """Entrywise K(x,y) <= 3 C_K sum_t phi_t(Q_t(x,y)) off the diagonal.

    Summed against any nonnegative density this gives
    T(f dsigma) <= 3 C_K sum_t T_Dt(f dsigma) pointwise.
    """
    if not ops:
        raise BadParams("need at least one dyadic operator")
    kernel = ops[0].kernel
    for o in ops[1:]:
        if o.kernel is not kernel:
            raise BadParams("family members must share one kernel")
    K = kernel.matrix
    C_K = ops[0].C_K
    n = ops[0].n
    total = np.zeros((n, n))
    for o in ops:
        total += o.matrix
    worst = 0.0
    witness = None
    for x in range(n):
        for y in range(n):
            if x == y:
                continue
            rhs = 3.0 * C_K * total[x, y]
            ratio = K[x, y] / total[x, y] / (3.0 * C_K) if total[x, y] > 0 else (
                np.inf if K[x, y] > 0 else 0.0)
            if ratio > worst:
                worst = ratio
                witness = {"x": x, "y": y}
            if not K[x, y] <= guard(rhs):
                bad = {"x": x, "y": y, "kernel": float(K[x, y]),
                       "family_sum": float(total[x, y]), "C_K": C_K}
                if strict:
                    raise EquivalenceViolated(
                        "direct kernel exceeds the dyadic family", **bad)
                return CheckReport("direct_below_family", "fail",
                                   ops[0].system.strict_delta, bad)
    return CheckReport("direct_below_family", "pass",
                       ops[0].system.strict_delta,
                       details={"worst_margin": worst, "systems": len(ops)})


def check_family_domination(ops: list[DyadicOperator] | tuple[DyadicOperator, ...],
                            f, strict: bool = True) -> CheckReport:
    """T(f dsigma) <= 3 C_K sum_t T_Dt(f dsigma) at omega-charged points."""
    if not ops:
        raise BadParams("need at least one dyadic operator")
    fv = _as_density(f, ops[0].n)
    if np.any(fv < 0):
        raise BadParams("domination check needs a nonnegative density")
    kernel = ops[0].kernel
    sigma, omega = ops[0].gen.sigma, ops[0].gen.omega
    for o in ops[1:]:
        if not (np.array_equal(o.gen.sigma.masses, sigma.masses)
                and np.array_equal(o.gen.omega.masses, omega.masses)):
            raise BadParams("family members must share the measure pair")
    C_K = ops[0].C_K
    lhs = apply_direct(kernel, fv, sigma)
    rhs = np.zeros_like(lhs)
    for o in ops:
        rhs = rhs + o.apply(fv)
    idx = np.flatnonzero(omega.masses > 0)
    for x in idx:
        L, R = float(lhs[x]), 3.0 * C_K * float(rhs[x])
        if np.isinf(L) and np.isinf(R):
            continue
        if not L <= guard(R):
            witness = {"x": int(x), "direct": L, "family_bound": R}
            if strict:
                raise EquivalenceViolated("direct operator exceeds the family",
                                          **witness)
            return CheckReport("family_domination", "fail",
                               ops[0].system.strict_delta, witness)
    return CheckReport("family_domination", "pass", ops[0].system.strict_delta,
                       details={"points": len(idx), "systems": len(ops)})


def check_point_cube_testing(op: DyadicOperator, p: float, q: float,
                             strong_constant: float, dual_constant: float,
                             strict: bool = True) -> CheckReport:
    """Finite testing constants force the point-cube bounds at joint atoms.

    At a joint atom x the two inequalities read

        K(x, x) omega({x})^(1/q)  <= strong * sigma({x})^(1/p - 1),
        K(x, x) sigma({x})^(1/p') <= dual   * omega({x})^(1/q' - 1),

    so in particular an infinite K(x, x) at a joint atom is incompatible
    with finite testing constants; that case fails with kxx_infinite set in
    the witness. With no joint atoms the check is vacuous.
    """
    if not (1.0 < p <= q):
        raise BadParams("need 1 < p <= q", p=p, q=q)
    gen = op.gen
    if not gen.joint_atoms:
        return CheckReport("point_cube_testing", "vacuous",
                           op.system.strict_delta,
                           details={"joint_atoms": 0})
    p_prime = p / (p - 1.0)
    q_prime = q / (q - 1.0) if np.isfinite(q) else 1.0
    sig, om = gen.sigma.masses, gen.omega.masses
    worst = 0.0
    for x in gen.joint_atoms:
        kxx = float(op.kernel.matrix[x, x])
        sides = (
            ("strong", kxx * om[x] ** (1.0 / q),
             strong_constant * sig[x] ** (1.0 / p - 1.0)),
            ("dual", kxx * sig[x] ** (1.0 / p_prime),
             dual_constant * om[x] ** (1.0 / q_prime - 1.0)),
        )
        for label, lhs, rhs in sides:
            if np.isinf(lhs) and np.isinf(rhs):
                continue
            if not lhs <= guard(rhs):
                witness = {"x": int(x), "side": label, "lhs": float(lhs),
                           "rhs": float(rhs), "kxx_infinite": bool(np.isinf(kxx))}
                if strict:
                    raise PointCubeViolated("point-cube testing bound failed",
                                            **witness)
                return CheckReport("point_cube_testing", "fail",
                                   op.system.strict_delta, witness)
            if rhs > 0 and np.isfinite(lhs / rhs):
                worst = max(worst, float(lhs / rhs))
    return CheckReport("point_cube_testing", "pass", op.system.strict_delta,
                       details={"joint_atoms": len(gen.joint_atoms),
                                "worst_ratio": worst})
