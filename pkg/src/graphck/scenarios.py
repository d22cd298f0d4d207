"""Canonical lab scenarios: reproducible inputs for the numeric experiments.

The interpolation scenarios put every mismatch between the two interpolands
on the first half of the grid, where the approximate-unit ramp is
identically one; the complementary scalar k then kills the mismatch at the
rate sqrt(1 - t^2), so every genuine defect is strictly decreasing in t and
comfortably below 1e-1 by t = 0.99.  At the ideal fiber all inputs are
exact, so the membership residuals sit at machine zero.

The family scenarios use graphs whose fiber-rank equations are solvable
(see the module notes in ``lab``): an infinite-valence vertex emitting two
new orthogonal-range edges (the closest finite-dimensional analogue of a
two-generator range decomposition), and a one-loop vertex extended by one
incoming edge.  Inputs are exact families perturbed off the ideal fiber and
then compressed back into their defining blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import FiniteGraph
from .lab import MatField, partial_isometry_defect

GRID = 16
DIM = 4


def _unit(i: int, j: int, dim: int) -> np.ndarray:
    m = np.zeros((dim, dim), dtype=complex)
    m[i, j] = 1.0
    return m


def _two_level(values: tuple[float, float], grid: int) -> list[float]:
    """First-half value, then second-half value (the last fiber included)."""
    half = grid // 2
    return [values[0] if s <= half else values[1] for s in range(grid + 1)]


@dataclass
class WScenario:
    name: str
    case: str
    a: MatField
    b: MatField
    r: MatField | None
    ideal_fiber: int | None


def lemma36_scenario(name: str) -> WScenario:
    """Inputs for the interpolation experiments, by scenario name.

    * ``scalar``: single fiber, b = a, the whole algebra as the ideal; the
      defects follow closed scalar formulas.
    * ``case_i_blocks``: constant exact a; b shares a's initial space with a
      first-half leak into a's range and a slightly heavy norm.
    * ``case_ii_blocks``: orthogonal blocks a, b with a first-half-damped b
      and an intertwining r that is only unitary on the second half.
    * ``off_ideal``: the case-i pair with both legs vanishing at the ideal
      fiber (a supported away from it, b a partial isometry there).
    """
    e = lambda i, j: _unit(i, j, DIM)
    if name == "scalar":
        a = MatField([_unit(0, 1, 2)])
        return WScenario(name, "i", a, a, None, None)
    if name == "case_i_blocks":
        a = MatField.constant(e(0, 1), GRID)
        b = MatField(
            [e(3, 1) + lam * e(0, 1) for lam in _two_level((0.25, 0.0), GRID)]
        )
        return WScenario(name, "i", a, b, None, GRID)
    if name == "case_ii_blocks":
        a = MatField.constant(e(0, 1), GRID)
        b = MatField([c * e(2, 3) for c in _two_level((0.8, 1.0), GRID)])
        r = MatField([g * e(3, 1) for g in _two_level((0.9, 1.0), GRID)])
        return WScenario(name, "ii", a, b, r, GRID)
    if name == "off_ideal":
        a = MatField([e(0, 1) if s < GRID else 0 * e(0, 1) for s in range(GRID + 1)])
        fibers = []
        for s in range(GRID + 1):
            if s == GRID:
                fibers.append(0 * e(0, 1))
            elif s <= GRID // 2:
                fibers.append(e(3, 1) + 0.25 * e(0, 1))
            else:
                fibers.append(e(3, 1))
        b = MatField(fibers)
        return WScenario(name, "i", a, b, None, GRID)
    raise ValueError(f"unknown scenario {name!r}")


CANONICAL_W_SCENARIOS = ("case_i_blocks", "case_ii_blocks", "off_ideal")


# ---------------------------------------------------------------------------
# Straightening trials
# ---------------------------------------------------------------------------


@dataclass
class StraightenTrial:
    x: np.ndarray
    isometry: np.ndarray
    left_projection: np.ndarray  # p with p @ x == x
    right_projection: np.ndarray  # q with x @ q == x
    defect: float


def random_partial_isometry(rng: np.random.Generator, dim: int, rank: int) -> np.ndarray:
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    u, _, vh = np.linalg.svd(m)
    return u[:, :rank] @ vh[:rank, :]


def injected_defect_trial(seed: int, defect: float, dim: int = 6) -> StraightenTrial:
    """A perturbed partial isometry with the stated defect, hit by bisection.

    The perturbation is compressed between the isometry's range and initial
    projections, so the one-sided relations p x = x and x q = x hold exactly
    and must survive straightening.
    """
    rng = np.random.default_rng(seed)
    rank = int(rng.integers(1, dim))
    v = random_partial_isometry(rng, dim, rank)
    p = v @ v.conj().T
    q = v.conj().T @ v
    noise = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    noise = p @ noise @ q
    noise /= np.linalg.norm(noise, 2)

    def defect_at(s: float) -> float:
        return partial_isometry_defect(v + s * noise)

    hi = defect
    while defect_at(hi) < defect:
        hi *= 2.0
    lo = 0.0
    for _ in range(80):
        mid = (lo + hi) / 2.0
        if defect_at(mid) < defect:
            lo = mid
        else:
            hi = mid
    s = (lo + hi) / 2.0
    x = v + s * noise
    return StraightenTrial(x=x, isometry=v, left_projection=p, right_projection=q, defect=defect_at(s))


# ---------------------------------------------------------------------------
# Family scenarios
# ---------------------------------------------------------------------------


@dataclass
class FamilyScenario:
    name: str
    small: FiniteGraph
    large: FiniteGraph
    infinite_vertices: frozenset[str]
    fields: dict[str, MatField]
    new_edge_ids: tuple[str, ...]


def _perturb_into_block(
    exact: MatField, rng: np.random.Generator, scale: float, left: np.ndarray, right: np.ndarray
) -> MatField:
    """Exact field plus block-compressed noise, untouched at the last fiber."""
    fibers = []
    grid = exact.grid_size
    for s in range(grid + 1):
        f = exact.fiber(s).copy()
        if s < grid and scale:
            n = rng.normal(size=f.shape) + 1j * rng.normal(size=f.shape)
            f = f + scale * (left @ n @ right)
        fibers.append(f)
    return MatField(fibers)


def family_scenario(name: str, seed: int = 0, noise: float = 1e-3) -> FamilyScenario:
    """Graph pair, infinite-valence set, and input fields, by scenario name.

    * ``identity``: large equals small; nothing to straighten.
    * ``orthogonal_pair``: an infinite-valence vertex u (fed by v) emits two
      new parallel edges onto a fresh tail w -> x (loop at x); the two new
      edges must come out with exactly orthogonal ranges under u.
    * ``unitary_extension``: a one-loop vertex (a unitary block) gains one
      incoming edge from a fresh vertex.
    """
    rng = np.random.default_rng(seed)
    if name in ("identity", "unitary_extension"):
        dim = 2
        small = FiniteGraph({"v"}, [("lv", "v", "v")])
        large = FiniteGraph({"v", "w"}, [("lv", "v", "v"), ("e", "w", "v")])
        xi_v = _unit(0, 0, dim)
        loop = MatField.constant(xi_v, GRID)
        exact_e = MatField.constant(_unit(1, 0, dim), GRID)
        if name == "identity":
            return FamilyScenario(name, large, large,
                                  frozenset(), {"lv": loop, "e": exact_e}, ())
        one_minus_p = np.eye(dim) - xi_v
        fields = {
            "lv": loop,
            "e": _perturb_into_block(exact_e, rng, noise, one_minus_p, xi_v),
        }
        return FamilyScenario(name, small, large, frozenset(), fields, ("e",))
    if name == "orthogonal_pair":
        dim = 6
        small = FiniteGraph({"u", "v"}, [("g", "v", "u")])
        large = FiniteGraph(
            {"u", "v", "w", "x"},
            [
                ("g", "v", "u"),
                ("e1", "u", "w"),
                ("e2", "u", "w"),
                ("j", "w", "x"),
                ("kx", "x", "x"),
            ],
        )
        xi_u = np.diag([1, 1, 0, 0, 0, 0]).astype(complex)
        xi_v = np.diag([0, 0, 1, 1, 0, 0]).astype(complex)
        rest = np.diag([0, 0, 0, 0, 1, 1]).astype(complex)
        g = _unit(2, 0, dim) + _unit(3, 1, dim)
        e1 = _unit(0, 4, dim)
        e2 = _unit(1, 4, dim)
        jj = _unit(4, 5, dim)
        kx = _unit(5, 5, dim)
        fields = {
            "g": MatField.constant(g, GRID),
            "e1": _perturb_into_block(MatField.constant(e1, GRID), rng, noise, xi_u, rest),
            "e2": _perturb_into_block(MatField.constant(e2, GRID), rng, noise, xi_u, rest),
            "j": _perturb_into_block(MatField.constant(jj, GRID), rng, noise, rest, rest),
            "kx": _perturb_into_block(MatField.constant(kx, GRID), rng, noise, rest, rest),
        }
        return FamilyScenario(name, small, large, frozenset({"u"}), fields,
                              ("e1", "e2", "j", "kx"))
    raise ValueError(f"unknown scenario {name!r}")


CANONICAL_FAMILY_SCENARIOS = ("identity", "orthogonal_pair", "unitary_extension")
