"""Hierarchical cube decompositions of a finite quasi-metric space.

A system holds one partition of the space per generation k in a finite
window [k_min, k_max]. Generation k groups points around a delta^k-separated
net of centers; nets are nested (coarse centers persist into finer nets),
each net point links to its nearest next-coarser net point, and a point's
cube at generation k is the set of points whose ancestor chain passes
through the same center. The window is chosen so the coarsest generation is
one cube equal to the whole space and the finest consists of singletons.

Geometry constants are calibrated as

    c1 = 1 / (12 a0^4),   C1 = 4 a0^2,   96 a0^6 delta <= 1,

where a0 is the quasi-triangle constant. Under that calibration a built
system satisfies the five structural properties enforced by check_system:
each generation partitions the space, generations are nested, every cube is
sandwiched between the strict balls of radii c1 delta^k and C1 delta^k
around its center, containing balls grow monotonically along ancestry, and
every center persists to the next finer generation. A caller may relax
delta; reports produced under a relaxed delta are marked non-strict and
construction retries reseeded sweeps before giving up.

A family of systems built from varied seeds is "adjacent" when every ball
B(x, r) embeds in a single cube of one of the systems whose diameter is at
most C r with C = 8 a0^3 / delta^2. Finiteness makes this checkable exactly:
for a fixed center the strict-ball member set is constant while the radius
runs between consecutive distance values, so check_ball_coverage enumerates
those finitely many member sets, searches each system's containing cubes for
an embedding with the diameter bound, and emits a replayable certificate
with the worst observed diameter ratio.

Two optional build knobs: pinning a point makes it a cube center at every
generation (it is swept first, so every net keeps it), and a truncated
window stops refinement early, leaving non-singleton finest cubes. A pair
of measures extends a system with point cubes at the joint atoms that are
not already singleton cubes; maximal_cubes, cover_ball and
expanding_cube_chain supply the cube combinatorics built on top.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import (
    BadParams,
    CoverageIncomplete,
    MixedSystems,
    NonPositiveRadius,
    NotCovered,
    OutOfRange,
    PropertyViolation,
    SamePoint,
    Unsatisfiable,
)
from .policy import TOLERANCES, CheckReport
from .space import PointMeasure, QuasiMetricSpace, ball

_SALT_SYSTEM = 0xD7AD

PROPERTY_NAMES = (
    "partition",
    "nesting",
    "ball_sandwich",
    "outer_ball_nesting",
    "center_chain",
)


@dataclass(frozen=True)
class Cube:
    system_id: int
    k: int
    center: int
    members: tuple[int, ...]
    diameter: float

    @property
    def size(self) -> int:
        return len(self.members)

    def __contains__(self, x: int) -> bool:
        return x in self.members


@dataclass(eq=False)
class DyadicSystem:
    space: QuasiMetricSpace
    system_id: int
    seed: int
    delta: float
    c1: float
    C1: float
    k_min: int
    k_max: int
    strict_delta: bool
    nets: dict[int, tuple[int, ...]]
    # ancestor[k - k_min, x] = center of the generation-k cube containing x
    ancestor: np.ndarray = field(repr=False)
    cubes: dict[tuple[int, int], Cube] = field(repr=False)
    generations: dict[int, tuple[Cube, ...]] = field(repr=False)
    x0: int | None = None

    @property
    def num_generations(self) -> int:
        return self.k_max - self.k_min + 1

    def generation_range(self) -> range:
        return range(self.k_min, self.k_max + 1)

    def _gi(self, k: int) -> int:
        if not self.k_min <= k <= self.k_max:
            raise OutOfRange(k=k, k_min=self.k_min, k_max=self.k_max)
        return k - self.k_min

    def cube(self, k: int, center: int) -> Cube:
        self._gi(k)
        key = (k, center)
        if key not in self.cubes:
            raise OutOfRange(k=k, center=center)
        return self.cubes[key]

    def containing_cube(self, k: int, x: int) -> Cube:
        return self.cubes[(k, int(self.ancestor[self._gi(k), x]))]

    @property
    def top(self) -> Cube:
        return self.generations[self.k_min][0]

    def leaf(self, x: int) -> Cube:
        return self.containing_cube(self.k_max, x)

    def _own(self, cube: Cube) -> None:
        if cube.system_id != self.system_id:
            raise MixedSystems(cube_system=cube.system_id, system=self.system_id)

    def parent(self, cube: Cube) -> Cube:
        self._own(cube)
        if cube.k == self.k_min:
            raise OutOfRange("coarsest cube has no parent", k=cube.k)
        gi = self._gi(cube.k - 1)
        return self.cubes[(cube.k - 1, int(self.ancestor[gi, cube.center]))]

    def children(self, cube: Cube) -> tuple[Cube, ...]:
        self._own(cube)
        if cube.k == self.k_max:
            return ()
        gi = self._gi(cube.k + 1)
        centers = sorted({int(self.ancestor[gi, x]) for x in cube.members})
        return tuple(self.cubes[(cube.k + 1, z)] for z in centers)

    def cube_chain(self, x: int) -> tuple[Cube, ...]:
        """Cubes containing x, coarsest first."""
        return tuple(self.containing_cube(k, x) for k in self.generation_range())

    def smallest_common_cube(self, x: int, y: int) -> Cube:
        """Finest-generation cube containing both points; requires x != y."""
        if x == y:
            raise SamePoint(x=x)
        for k in range(self.k_max, self.k_min - 1, -1):
            gi = k - self.k_min
            if self.ancestor[gi, x] == self.ancestor[gi, y]:
                return self.containing_cube(k, x)
        raise PropertyViolation("no common cube; coarsest generation is not the whole space",
                                x=x, y=y)

    def outer_ball_radius(self, k: int) -> float:
        return self.C1 * self.delta**k

    def outer_ball_members(self, cube: Cube) -> tuple[int, ...]:
        """Strict ball around the cube center guaranteed to contain the cube."""
        return ball(self.space, cube.center, self.outer_ball_radius(cube.k)).members

    def all_cubes(self) -> Iterator[Cube]:
        for k in self.generation_range():
            yield from self.generations[k]


def dyadic_parameters(a0: float, delta: float | None = None) -> tuple[float, float, float, bool]:
    """Return (delta, c1, C1, strict) for a quasi-triangle constant a0."""
    c1 = 1.0 / (12.0 * a0**4)
    C1 = 4.0 * a0**2
    if delta is None:
        delta = 1.0 / (96.0 * a0**6)
    if not 0.0 < delta < 1.0:
        raise BadParams("delta must lie in (0, 1)", delta=delta)
    strict = 96.0 * a0**6 * delta <= 1.0 + TOLERANCES["exact_guard_rel"]
    return float(delta), c1, C1, strict


def _window(space: QuasiMetricSpace, delta: float, c1: float, C1: float) -> tuple[int, int]:
    diam = space.diameter
    k = 0
    if diam > 0:
        while not c1 * delta**k > diam:
            k -= 1
        while c1 * delta ** (k + 1) > diam:
            k += 1
    k_min = k
    md = space.min_distance
    if not np.isfinite(md):
        return k_min, k_min
    k = k_min
    while not C1 * delta**k < md:
        k += 1
    return k_min, k


def _greedy_nets(space: QuasiMetricSpace, perm: np.ndarray,
                 k_min: int, k_max: int, delta: float) -> dict[int, list[int]]:
    n = space.n
    d = space.dist
    in_net = np.zeros(n, dtype=bool)
    min_dist_to_net = np.full(n, np.inf)
    current: list[int] = []
    nets: dict[int, list[int]] = {}
    for k in range(k_min, k_max + 1):
        sep = delta**k
        for p in perm:
            p = int(p)
            if not in_net[p] and min_dist_to_net[p] >= sep:
                in_net[p] = True
                current.append(p)
                np.minimum(min_dist_to_net, d[p], out=min_dist_to_net)
        nets[k] = list(current)
    return nets


def build_system(space: QuasiMetricSpace, seed: int = 0, delta: float | None = None,
                 system_id: int = 0, max_attempts: int = 8,
                 x0: int | None = None, k_max: int | None = None) -> DyadicSystem:
    """Build one cube system; retries reseeded sweeps on a property failure.

    x0 pins a point as the first sweep candidate of every attempt, so it
    joins every net and is a cube center at every generation. k_max asks for
    a coarser finest generation; the value is clamped to the computed window
    and a truncated finest generation may keep non-singleton cubes.
    """
    delta, c1, C1, strict = dyadic_parameters(space.a0, delta)
    k_min, k_auto = _window(space, delta, c1, C1)
    if k_max is None:
        k_max = k_auto
    else:
        k_max = int(min(max(k_max, k_min), k_auto))
    n = space.n
    if x0 is not None and not 0 <= x0 < n:
        raise OutOfRange(x0=x0, n=n)
    d = space.dist
    last_failure: CheckReport | None = None

    for attempt in range(max_attempts):
        rng = np.random.default_rng(
            np.random.SeedSequence([_SALT_SYSTEM, seed, system_id, attempt]))
        perm = rng.permutation(n)
        if x0 is not None:
            perm = np.concatenate(([x0], perm[perm != x0]))
        perm_rank = np.empty(n, dtype=int)
        perm_rank[perm] = np.arange(n)
        nets = _greedy_nets(space, perm, k_min, k_max, delta)
        if k_max == k_auto and len(nets[k_max]) != n:
            raise PropertyViolation(
                "finest net is not the whole space; window selection is broken",
                k_max=k_max, net_size=len(nets[k_max]), n=n)

        gens = k_max - k_min + 1
        ancestor = np.empty((gens, n), dtype=int)
        fin = np.asarray(nets[k_max])
        for x in range(n):
            dd = d[x, fin]
            best = np.lexsort((perm_rank[fin], dd))[0]
            ancestor[gens - 1, x] = fin[best]
        for k in range(k_max, k_min, -1):
            prev = np.asarray(nets[k - 1])
            link = np.empty(n, dtype=int)  # valid on nets[k] only
            for z in nets[k]:
                dd = d[z, prev]
                best = np.lexsort((perm_rank[prev], dd))[0]
                link[z] = prev[best]
            ancestor[k - 1 - k_min] = link[ancestor[k - k_min]]

        cubes: dict[tuple[int, int], Cube] = {}
        generations: dict[int, tuple[Cube, ...]] = {}
        for k in range(k_min, k_max + 1):
            gi = k - k_min
            gen_cubes = []
            for z in sorted(nets[k]):
                members = tuple(int(i) for i in np.flatnonzero(ancestor[gi] == z))
                if not members:
                    raise PropertyViolation("net point owns no cube", k=k, center=z)
                diam = float(d[np.ix_(members, members)].max()) if len(members) > 1 else 0.0
                cube = Cube(system_id=system_id, k=k, center=z,
                            members=members, diameter=diam)
                cubes[(k, z)] = cube
                gen_cubes.append(cube)
            generations[k] = tuple(gen_cubes)

        sys = DyadicSystem(space=space, system_id=system_id, seed=seed, delta=delta,
                           c1=c1, C1=C1, k_min=k_min, k_max=k_max, strict_delta=strict,
                           nets={k: tuple(v) for k, v in nets.items()},
                           ancestor=ancestor, cubes=cubes, generations=generations,
                           x0=x0)
        reports = check_system(sys, strict=False)
        bad = [r for r in reports if not r.ok]
        if not bad:
            return sys
        last_failure = bad[0]

    assert last_failure is not None
    raise PropertyViolation(f"property '{last_failure.name}' failed after "
                            f"{max_attempts} attempts",
                            **(last_failure.witness or {}))


# ---------------------------------------------------------------------------
# structural property checks
# ---------------------------------------------------------------------------

def _report(sys: DyadicSystem, name: str, ok: bool, witness: dict | None = None,
            strict: bool = True, **details) -> CheckReport:
    rep = CheckReport(name=name, status="pass" if ok else "fail",
                      strict_mode=sys.strict_delta, witness=witness, details=details)
    if strict and not ok:
        raise PropertyViolation(f"property '{name}' violated", **(witness or {}))
    return rep


def check_partition(sys: DyadicSystem, strict: bool = True) -> CheckReport:
    """Every generation splits the space into pairwise disjoint cubes."""
    n = sys.space.n
    for k in sys.generation_range():
        seen = np.zeros(n, dtype=int)
        for cube in sys.generations[k]:
            for x in cube.members:
                seen[x] += 1
        if not np.all(seen == 1):
            x = int(np.flatnonzero(seen != 1)[0])
            return _report(sys, "partition", False,
                           {"k": k, "x": x, "multiplicity": int(seen[x])}, strict)
    return _report(sys, "partition", True, strict=strict)


def check_nesting(sys: DyadicSystem, strict: bool = True) -> CheckReport:
    """Each cube lies inside a single cube of the previous generation."""
    for k in range(sys.k_min, sys.k_max):
        gi = k - sys.k_min
        for cube in sys.generations[k + 1]:
            owners = np.unique(sys.ancestor[gi, list(cube.members)])
            if owners.size != 1 or owners[0] != sys.parent(cube).center:
                return _report(sys, "nesting", False,
                               {"k": k + 1, "center": cube.center,
                                "owners": [int(o) for o in owners]}, strict)
    return _report(sys, "nesting", True, strict=strict)


def check_ball_sandwich(sys: DyadicSystem, strict: bool = True) -> CheckReport:
    """B(z, c1 d^k) inside the cube inside B(z, C1 d^k), strict balls."""
    d = sys.space.dist
    for cube in sys.all_cubes():
        inner = set(np.flatnonzero(d[cube.center] < sys.c1 * sys.delta**cube.k))
        outer = set(np.flatnonzero(d[cube.center] < sys.C1 * sys.delta**cube.k))
        mem = set(cube.members)
        if not inner <= mem:
            return _report(sys, "ball_sandwich", False,
                           {"k": cube.k, "center": cube.center, "side": "inner",
                            "missing": sorted(inner - mem)}, strict)
        if not mem <= outer:
            return _report(sys, "ball_sandwich", False,
                           {"k": cube.k, "center": cube.center, "side": "outer",
                            "excess": sorted(mem - outer)}, strict)
    return _report(sys, "ball_sandwich", True, strict=strict)


def check_outer_ball_nesting(sys: DyadicSystem, strict: bool = True) -> CheckReport:
    """The containing ball of a cube lies inside its parent's containing ball.

    Containment composes along ancestor chains, so the parent step implies the
    statement for every nested pair of cubes.
    """
    d = sys.space.dist
    for k in range(sys.k_min + 1, sys.k_max + 1):
        for cube in sys.generations[k]:
            par = sys.parent(cube)
            inner = np.flatnonzero(d[cube.center] < sys.outer_ball_radius(cube.k))
            outer = d[par.center, inner] < sys.outer_ball_radius(par.k)
            if not outer.all():
                y = int(inner[~outer][0])
                return _report(sys, "outer_ball_nesting", False,
                               {"k": k, "center": cube.center,
                                "parent_center": par.center, "escapes": y}, strict)
    return _report(sys, "outer_ball_nesting", True, strict=strict)


def check_center_chain(sys: DyadicSystem, strict: bool = True) -> CheckReport:
    """Every center recurs one generation finer, and owns itself there."""
    for k in range(sys.k_min, sys.k_max):
        gi1 = k + 1 - sys.k_min
        for cube in sys.generations[k]:
            z = cube.center
            if (k + 1, z) not in sys.cubes:
                return _report(sys, "center_chain", False,
                               {"k": k, "center": z, "reason": "not a finer center"},
                               strict)
            if int(sys.ancestor[gi1, z]) != z:
                return _report(sys, "center_chain", False,
                               {"k": k, "center": z, "reason": "not self-owned"},
                               strict)
            if sys.parent(sys.cubes[(k + 1, z)]).center != z:
                return _report(sys, "center_chain", False,
                               {"k": k, "center": z, "reason": "parent differs"},
                               strict)
    return _report(sys, "center_chain", True, strict=strict)


_CHECKS = {
    "partition": check_partition,
    "nesting": check_nesting,
    "ball_sandwich": check_ball_sandwich,
    "outer_ball_nesting": check_outer_ball_nesting,
    "center_chain": check_center_chain,
}


def check_system(sys: DyadicSystem, strict: bool = True) -> list[CheckReport]:
    """Run all five structural checks; in strict mode the first failure raises."""
    return [_CHECKS[name](sys, strict=strict) for name in PROPERTY_NAMES]


# ---------------------------------------------------------------------------
# adjacent families and ball coverage
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoverageEntry:
    x: int
    band_k: int
    lo: float
    hi: float
    t: int
    cube_k: int
    cube_center: int
    diameter: float


@dataclass(frozen=True)
class CoverageCertificate:
    """Replayable witness that every ball embeds in some system's cube.

    For each ball center and each radius regime (lo, hi] between consecutive
    distance values, one entry names a cube that contains the ball with
    diameter at most C_bound * lo. observed_C is the worst diameter / lo over
    entries with lo > 0; radii above the top band are covered by the whole
    space (r_large_ok), radii below the bottom band give singleton balls
    inside singleton cubes (r_small_ok).
    """

    C_bound: float
    observed_C: float
    num_systems: int
    entries: tuple[CoverageEntry, ...]
    r_large_ok: bool
    r_small_ok: bool


@dataclass(frozen=True)
class AdjacentSystems:
    systems: tuple[DyadicSystem, ...]
    certificate: CoverageCertificate

    def __len__(self) -> int:
        return len(self.systems)

    def __iter__(self) -> Iterator[DyadicSystem]:
        return iter(self.systems)

    def __getitem__(self, t: int) -> DyadicSystem:
        return self.systems[t]


def coverage_bound(a0: float, delta: float) -> float:
    return 8.0 * a0**3 / delta**2


def band_index(delta: float, r: float) -> int:
    """The generation k whose radius band (delta^{k+2}, delta^{k+1}] holds r."""
    if not r > 0:
        raise BadParams("radius must be positive", r=r)
    k = int(np.floor(np.log(r) / np.log(delta))) - 1
    while r > delta ** (k + 1):
        k -= 1
    while r <= delta ** (k + 2):
        k += 1
    return k


def check_ball_coverage(systems: list[DyadicSystem] | tuple[DyadicSystem, ...],
                        strict: bool = True,
                        ) -> tuple[CheckReport, CoverageCertificate | None]:
    """Certify that every strict ball embeds in one cube of one system.

    For a fixed center x the member set of B(x, r) is constant while r runs
    over (lo, hi] between consecutive distance values, and equals
    {y : dist(x, y) <= lo}. The diameter constraint diam(Q) <= C_bound * r is
    hardest as r decreases to lo, so testing at lo settles the whole regime.
    Candidate cubes are the containing cubes of x at the band generation of
    the regime and coarser; any candidate meeting both constraints certifies.
    """
    if not systems:
        raise BadParams("need at least one system")
    base = systems[0]
    for s in systems[1:]:
        if (s.space is not base.space or s.delta != base.delta
                or s.k_min != base.k_min or s.k_max != base.k_max):
            raise BadParams("systems must share a space and a window")
    space = base.space
    delta, k_min, k_max = base.delta, base.k_min, base.k_max
    C = coverage_bound(space.a0, delta)
    d = space.dist
    n = space.n
    strict_mode = all(s.strict_delta for s in systems)

    r_large_ok = space.diameter <= C * delta ** (k_min + 1)
    r_small_ok = delta ** (k_max + 2) < space.min_distance
    if not (r_large_ok and r_small_ok):
        witness = {"r_large_ok": r_large_ok, "r_small_ok": r_small_ok}
        if strict:
            raise CoverageIncomplete("radius regimes beyond the band window fail",
                                     **witness)
        return CheckReport("ball_coverage", "fail", strict_mode, witness), None

    entries: list[CoverageEntry] = []
    observed = 0.0
    for x in range(n):
        dist_vals = np.unique(d[x])
        for k in range(k_min, k_max + 1):
            lo_edge = delta ** (k + 2)
            hi_edge = delta ** (k + 1)
            interior = dist_vals[(dist_vals > lo_edge) & (dist_vals < hi_edge)]
            edges = [lo_edge, *[float(a) for a in interior], hi_edge]
            for lo, hi in zip(edges[:-1], edges[1:]):
                members = np.flatnonzero(d[x] <= lo)
                hit = None
                for t, sys in enumerate(systems):
                    for kc in range(k, k_min - 1, -1):
                        gi = kc - k_min
                        z = int(sys.ancestor[gi, x])
                        cube = sys.cubes[(kc, z)]
                        if cube.diameter <= C * lo and np.all(sys.ancestor[gi, members] == z):
                            hit = CoverageEntry(x=x, band_k=k, lo=lo, hi=hi, t=t,
                                                cube_k=kc, cube_center=z,
                                                diameter=cube.diameter)
                            break
                    if hit is not None:
                        break
                if hit is None:
                    witness = {"x": x, "band_k": k, "lo": lo,
                               "members": [int(m) for m in members]}
                    if strict:
                        raise CoverageIncomplete("ball embeds in no cube", **witness)
                    return CheckReport("ball_coverage", "fail", strict_mode,
                                       witness), None
                entries.append(hit)
                if lo > 0:
                    observed = max(observed, hit.diameter / lo)

    cert = CoverageCertificate(C_bound=C, observed_C=observed,
                               num_systems=len(systems), entries=tuple(entries),
                               r_large_ok=r_large_ok, r_small_ok=r_small_ok)
    report = CheckReport("ball_coverage", "pass", strict_mode,
                         details={"entries": len(entries), "observed_C": observed,
                                  "C_bound": C})
    return report, cert


def replay_coverage(systems: list[DyadicSystem] | tuple[DyadicSystem, ...],
                    cert: CoverageCertificate) -> bool:
    """Re-verify every certificate entry against the named cubes."""
    if not systems:
        return False
    space = systems[0].space
    d = space.dist
    C = cert.C_bound
    for e in cert.entries:
        if not 0 <= e.t < len(systems):
            return False
        sys = systems[e.t]
        cube = sys.cubes.get((e.cube_k, e.cube_center))
        if cube is None:
            return False
        members = set(np.flatnonzero(d[e.x] <= e.lo))
        if not members <= set(cube.members):
            return False
        if cube.diameter > C * e.lo or cube.diameter != e.diameter:
            return False
    return True


def build_adjacent_systems(space: QuasiMetricSpace, seed: int = 0,
                           delta: float | None = None,
                           num_systems: int | None = None,
                           max_systems: int = 12,
                           x0: int | None = None) -> AdjacentSystems:
    """Build seed-varied systems until ball coverage certifies.

    With num_systems fixed, exactly that many are built and a coverage
    failure raises. Otherwise systems are added one at a time up to
    max_systems before giving up. x0 pins a point as a center of every
    generation of every member system.
    """
    systems: list[DyadicSystem] = []
    target = num_systems if num_systems is not None else 1
    if target < 1:
        raise BadParams("need at least one system", num_systems=num_systems)
    last_witness: dict | None = None
    while True:
        while len(systems) < target:
            systems.append(build_system(space, seed=seed, delta=delta,
                                        system_id=len(systems), x0=x0))
        report, cert = check_ball_coverage(systems, strict=False)
        if report.status == "pass":
            assert cert is not None
            return AdjacentSystems(systems=tuple(systems), certificate=cert)
        last_witness = report.witness
        if num_systems is not None or target >= max_systems:
            raise CoverageIncomplete(
                f"coverage incomplete with {len(systems)} systems",
                **(last_witness or {}))
        target += 1


# ---------------------------------------------------------------------------
# generalized cubes and cube combinatorics
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class GeneralizedSystem:
    """A cube system extended with point cubes at the joint atoms of two measures.

    A point x is a joint atom when both measures charge it. Joint atoms whose
    singleton {x} is not already the member set of a standard cube gain a
    point cube one generation past the window; with a full window every
    finest cube is a singleton and no point cubes are added.
    """

    base: DyadicSystem
    sigma: PointMeasure
    omega: PointMeasure
    joint_atoms: tuple[int, ...]
    point_cubes: tuple[Cube, ...]

    @property
    def space(self) -> QuasiMetricSpace:
        return self.base.space

    def is_joint_atom(self, x: int) -> bool:
        return bool(self.sigma.masses[x] > 0 and self.omega.masses[x] > 0)

    def all_cubes(self) -> Iterator[Cube]:
        yield from self.base.all_cubes()
        yield from self.point_cubes


def generalize(system: DyadicSystem, sigma: PointMeasure,
               omega: PointMeasure) -> GeneralizedSystem:
    n = system.space.n
    for name, mv in (("sigma", sigma), ("omega", omega)):
        if mv.masses.shape != (n,):
            raise BadParams("measure does not match the space",
                            measure=name, size=mv.masses.shape, n=n)
    joint = tuple(int(x) for x in
                  np.flatnonzero((sigma.masses > 0) & (omega.masses > 0)))
    singleton_sets = {c.members for c in system.all_cubes() if c.size == 1}
    extra = tuple(Cube(system_id=system.system_id, k=system.k_max + 1,
                       center=x, members=(x,), diameter=0.0)
                  for x in joint if (x,) not in singleton_sets)
    return GeneralizedSystem(base=system, sigma=sigma, omega=omega,
                             joint_atoms=joint, point_cubes=extra)


def maximal_cubes(cubes) -> tuple[Cube, ...]:
    """Cubes of one system not contained in another cube of the collection.

    Equal member sets count as one cube and the coarsest generation
    representative survives. Every input cube lies inside exactly one
    returned cube and the returned cubes are pairwise disjoint; overlap
    would mean the input mixed incompatible hierarchies, which raises.
    """
    items = list(cubes)
    if not items:
        return ()
    sid = items[0].system_id
    for c in items[1:]:
        if c.system_id != sid:
            raise MixedSystems(cube_system=c.system_id, system=sid)
    by_set: dict[tuple[int, ...], Cube] = {}
    for c in items:
        prev = by_set.get(c.members)
        if prev is None or c.k < prev.k:
            by_set[c.members] = c
    kept: list[Cube] = []
    kept_sets: list[set[int]] = []
    for c in sorted(by_set.values(), key=lambda c: (-c.size, c.k, c.center)):
        s = set(c.members)
        if not any(s <= ks for ks in kept_sets):
            kept.append(c)
            kept_sets.append(s)
    for i in range(len(kept)):
        for j in range(i + 1, len(kept)):
            if kept_sets[i] & kept_sets[j]:
                raise PropertyViolation(
                    "maximal cubes overlap without nesting",
                    first=(kept[i].k, kept[i].center),
                    second=(kept[j].k, kept[j].center))
    return tuple(kept)


def find_cube_with_positive_masses(system: DyadicSystem, sigma: PointMeasure,
                                   omega: PointMeasure, A) -> Cube:
    """Deepest standard cube with sigma mass that meets A in omega mass.

    The top cube always qualifies when sigma is nontrivial and omega charges
    A at all, so the scan from the finest generation upward cannot miss.
    """
    n = system.space.n
    pts = sorted({int(a) for a in A})
    for a in pts:
        if not 0 <= a < n:
            raise OutOfRange(point=a, n=n)
    a_mask = np.zeros(n, dtype=bool)
    a_mask[pts] = True
    omega_on_a = float(np.sum(omega.masses[a_mask])) if pts else 0.0
    if not (sigma.total > 0 and omega_on_a > 0):
        raise Unsatisfiable(sigma_total=sigma.total, omega_on_A=omega_on_a)
    for k in range(system.k_max, system.k_min - 1, -1):
        for cube in system.generations[k]:
            inside = [m for m in cube.members if a_mask[m]]
            if sigma.of(cube.members) > 0 and inside and omega.of(inside) > 0:
                return cube
    raise PropertyViolation("the top cube failed to qualify; measures are "
                            "inconsistent with the space", n=n)


# ---------------------------------------------------------------------------
# ball covers and expanding chains
# ---------------------------------------------------------------------------

def _family_systems(family) -> tuple[DyadicSystem, ...]:
    if isinstance(family, AdjacentSystems):
        return family.systems
    if isinstance(family, DyadicSystem):
        return (family,)
    systems = tuple(family)
    if not systems:
        raise BadParams("need at least one system")
    return systems


def cover_ball(family, x: int, r: float, closed: bool = False) -> tuple[int, Cube]:
    """Find (system index, cube) containing B(x, r) with diameter <= C r.

    C is the coverage bound 8 a0^3 / delta^2. The ball is strict by default;
    closed=True covers {y : dist(x, y) <= r} instead. Within each system only
    the finest containing cube matters because diameters grow along ancestry,
    so the first system whose finest containing cube meets the diameter cap
    wins.
    """
    systems = _family_systems(family)
    space = systems[0].space
    if not 0 <= x < space.n:
        raise OutOfRange(x=x, n=space.n)
    r_ok = r >= 0 if closed else r > 0
    if not r_ok:
        raise NonPositiveRadius(x=x, r=r, closed=closed)
    row = space.dist[x]
    mset = {int(i) for i in np.flatnonzero(row <= r if closed else row < r)}
    cap = coverage_bound(space.a0, systems[0].delta) * r
    for t, sys in enumerate(systems):
        for k in range(sys.k_max, sys.k_min - 1, -1):
            cube = sys.containing_cube(k, x)
            if mset <= set(cube.members):
                if cube.diameter <= cap:
                    return t, cube
                break
    raise NotCovered("no cube holds the ball within the diameter cap",
                     x=x, r=r, closed=closed, cap=cap)


def expanding_cube_chain(family, x: int, r: float) -> tuple[tuple[int, Cube], ...]:
    """Nested cubes swallowing geometrically inflated balls around B(x, r).

    With c0 the coverage bound, link j contains the closed ball of radius
    c0^j r (link 0 contains the strict ball B(x, r)) and sits inside the
    closed ball of radius c0^{j+1} r; successive links nest. The chain stops
    at the first link equal to the whole space, which the geometric inflation
    reaches after O(log diameter / log c0) steps.
    """
    systems = _family_systems(family)
    space = systems[0].space
    if not r > 0:
        raise NonPositiveRadius(x=x, r=r)
    c0 = coverage_bound(space.a0, systems[0].delta)
    d = space.dist
    links: list[tuple[int, Cube]] = []
    t, cube = cover_ball(family, x, r)
    target = c0 * r
    for _ in range(64):
        if float(np.max(d[x, list(cube.members)])) > target:
            raise PropertyViolation("chain link escapes its closed inflated ball",
                                    x=x, r=r, target=target,
                                    link=(cube.k, cube.center))
        links.append((t, cube))
        if cube.size == space.n:
            return tuple(links)
        prev = set(cube.members)
        t, cube = cover_ball(family, x, target, closed=True)
        if not prev <= set(cube.members):
            raise PropertyViolation("chain link is not nested in its successor",
                                    x=x, r=r, target=target)
        target = c0 * target
    raise PropertyViolation("expanding chain failed to reach the whole space",
                            x=x, r=r)
