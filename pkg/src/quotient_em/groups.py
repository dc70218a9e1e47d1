"""Group actions on parameter layouts, orbit distances, canonical sections.

Three symmetries are implemented: component relabeling (S_k) for mixtures,
global sign flips ({+1,-1}) for symmetric two-component models, and right
multiplication by O(r) on a loading block for factor models.  Finite groups
get exact enumeration-based orbit distances and a lexicographic canonical
section; the O(r) orbit distance is the closed-form orthogonal Procrustes
minimizer and its section is the polar normalization of a chart minor.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, ChartError, DimensionError, LayoutError
from .numerics import polar_factors

__all__ = [
    "Block",
    "ParamLayout",
    "GroupAction",
    "PermutationAction",
    "SignAction",
    "OrthogonalAction",
    "OrbitDistance",
    "orbit_distance",
    "canonical_section_finite",
    "sign_canonicalize",
    "polar_slice",
    "LexSection",
    "SignSection",
    "PolarSection",
    "section_for",
    "lex_less",
]

PERMUTATION_ENUMERATION_CAP = 8  # k! enumeration guard


@dataclass(frozen=True)
class Block:
    """A named contiguous slab of the flat parameter vector."""

    name: str
    shape: tuple[int, ...]
    offset: int

    @property
    def size(self) -> int:
        return int(np.prod(self.shape)) if self.shape else 1

    @property
    def sl(self) -> slice:
        return slice(self.offset, self.offset + self.size)


@dataclass(frozen=True)
class ParamLayout:
    """Maps block names to slices of the flattened parameter vector."""

    blocks: tuple[Block, ...]

    @classmethod
    def build(cls, spec: list[tuple[str, tuple[int, ...]]]) -> "ParamLayout":
        blocks = []
        offset = 0
        for name, shape in spec:
            blocks.append(Block(name=name, shape=tuple(shape), offset=offset))
            offset += int(np.prod(shape))
        return cls(blocks=tuple(blocks))

    @property
    def dim(self) -> int:
        return sum(b.size for b in self.blocks)

    def block(self, name: str) -> Block:
        for b in self.blocks:
            if b.name == name:
                return b
        raise LayoutError(f"layout has no block named {name!r}")

    def has_block(self, name: str) -> bool:
        return any(b.name == name for b in self.blocks)

    def get(self, theta: np.ndarray, name: str) -> np.ndarray:
        b = self.block(name)
        return np.asarray(theta, dtype=float)[b.sl].reshape(b.shape)

    def pack(self, parts: dict[str, np.ndarray]) -> np.ndarray:
        theta = np.empty(self.dim)
        for b in self.blocks:
            part = np.asarray(parts[b.name], dtype=float)
            if part.shape != b.shape:
                raise LayoutError(
                    f"block {b.name!r} expects shape {b.shape}, got {part.shape}"
                )
            theta[b.sl] = part.reshape(-1)
        return theta

    def check(self, theta) -> np.ndarray:
        t = np.asarray(theta, dtype=float).reshape(-1)
        if t.shape[0] != self.dim:
            raise LayoutError(
                f"parameter length {t.shape[0]} does not match layout dim {self.dim}"
            )
        return t


def lex_less(a: np.ndarray, b: np.ndarray) -> bool:
    """Strict coordinate-wise lexicographic order on flat vectors."""
    for x, y in zip(a, b):
        if x < y:
            return True
        if x > y:
            return False
    return False


class GroupAction:
    """Base interface: a group acting on a fixed parameter layout."""

    layout: ParamLayout
    finite: bool = True

    def identity(self):
        raise NotImplementedError

    def compose(self, g, h):
        """Element g*h, satisfying act(g, act(h, x)) == act(g*h, x)."""
        raise NotImplementedError

    def act(self, g, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def elements(self):
        raise NotImplementedError

    def random_element(self, rng: np.random.Generator):
        raise NotImplementedError


@dataclass(frozen=True)
class PermutationAction(GroupAction):
    """S_k relabeling of per-component rows of the named blocks.

    Elements are tuples p with p[z] = new label of component z; the acted
    parameter carries old component z's row at position p[z].
    """

    k: int
    layout: ParamLayout
    component_blocks: tuple[str, ...]
    finite: bool = field(default=True, init=False)

    def identity(self):
        return tuple(range(self.k))

    def compose(self, g, h):
        return tuple(g[h[z]] for z in range(self.k))

    def act(self, g, theta: np.ndarray) -> np.ndarray:
        t = self.layout.check(theta).copy()
        p = np.asarray(g, dtype=int)
        if sorted(p.tolist()) != list(range(self.k)):
            raise LayoutError(f"not a permutation of 0..{self.k - 1}: {g}")
        for name in self.component_blocks:
            b = self.layout.block(name)
            rows = t[b.sl].reshape(b.shape[0], -1)
            out = np.empty_like(rows)
            out[p] = rows
            t[b.sl] = out.reshape(-1)
        return t

    def elements(self):
        if self.k > PERMUTATION_ENUMERATION_CAP:
            raise CapacityError(
                f"permutation enumeration limited to k <= {PERMUTATION_ENUMERATION_CAP}, got k={self.k}"
            )
        return [tuple(p) for p in itertools.permutations(range(self.k))]

    def random_element(self, rng: np.random.Generator):
        return tuple(int(i) for i in rng.permutation(self.k))


@dataclass(frozen=True)
class SignAction(GroupAction):
    """{+1,-1} acting by global negation of the parameter vector."""

    layout: ParamLayout
    finite: bool = field(default=True, init=False)

    def identity(self):
        return 1

    def compose(self, g, h):
        return int(g) * int(h)

    def act(self, g, theta: np.ndarray) -> np.ndarray:
        if g not in (1, -1):
            raise LayoutError(f"sign group element must be +1 or -1, got {g}")
        t = self.layout.check(theta)
        return t.copy() if g == 1 else -t

    def elements(self):
        return [1, -1]

    def random_element(self, rng: np.random.Generator):
        return 1 if rng.random() < 0.5 else -1


@dataclass(frozen=True)
class OrthogonalAction(GroupAction):
    """Right O(r) multiplication on the loading block, A -> A R.

    As a left action this composes oppositely: act(g, act(h, A)) = A h g,
    so compose(g, h) = h @ g.
    """

    r: int
    layout: ParamLayout
    loading_block: str = "loading"
    finite: bool = field(default=False, init=False)

    def identity(self):
        return np.eye(self.r)

    def compose(self, g, h):
        return np.asarray(h, dtype=float) @ np.asarray(g, dtype=float)

    def act(self, g, theta: np.ndarray) -> np.ndarray:
        rmat = np.asarray(g, dtype=float)
        if rmat.shape != (self.r, self.r):
            raise LayoutError(f"group element must be {self.r}x{self.r}, got {rmat.shape}")
        t = self.layout.check(theta).copy()
        b = self.layout.block(self.loading_block)
        a = t[b.sl].reshape(b.shape)
        t[b.sl] = (a @ rmat).reshape(-1)
        return t

    def elements(self):
        raise CapacityError("O(r) is not finite; orbit work uses Procrustes, not enumeration")

    def random_element(self, rng: np.random.Generator):
        # Haar via QR with sign-fixed diagonal
        z = rng.standard_normal((self.r, self.r))
        q, rr = np.linalg.qr(z)
        q = q * np.sign(np.diag(rr))
        if rng.random() < 0.5:  # cover both O(r) components
            q[:, 0] = -q[:, 0]
        return q


@dataclass(frozen=True)
class OrbitDistance:
    """inf_g ||theta - g . theta'|| together with the element attaining it."""

    value: float
    aligning_element: object


def _procrustes_rotation(a: np.ndarray, a_prime: np.ndarray) -> np.ndarray:
    """R in O(r) minimizing ||a - a_prime @ R||_F (SVD of a'^T a, R = U V^T)."""
    m = a_prime.T @ a
    u, _, vt = np.linalg.svd(m)
    return u @ vt


def orbit_distance(theta, theta_prime, action: GroupAction) -> OrbitDistance:
    """Orbit pseudometric inf_g ||theta - act(g, theta')|| in Euclidean norm.

    Finite groups are minimized by exact enumeration (k <= 8 for S_k); the
    O(r) infimum over the loading block is the orthogonal Procrustes solution.
    """
    t = action.layout.check(theta)
    tp = action.layout.check(theta_prime)
    if action.finite:
        best_val = math.inf
        best_g = None
        for g in action.elements():
            v = float(np.linalg.norm(t - action.act(g, tp)))
            if v < best_val:
                best_val = v
                best_g = g
        return OrbitDistance(value=best_val, aligning_element=best_g)
    if not isinstance(action, OrthogonalAction):
        raise CapacityError(f"no orbit-distance rule for action {type(action).__name__}")
    b = action.layout.block(action.loading_block)
    a = t[b.sl].reshape(b.shape)
    ap = tp[b.sl].reshape(b.shape)
    rmat = _procrustes_rotation(a, ap)
    value = float(np.linalg.norm(t - action.act(rmat, tp)))
    return OrbitDistance(value=value, aligning_element=rmat)


def canonical_section_finite(theta, action: GroupAction) -> np.ndarray:
    """Lexicographically smallest orbit element under a finite action.

    Ties are broken by enumeration order (strict-less comparison keeps the
    earliest element), mirroring a smallest-index tie rule.
    """
    if not action.finite:
        raise CapacityError("canonical_section_finite requires a finite group action")
    t = action.layout.check(theta)
    best = None
    for g in action.elements():
        cand = action.act(g, t)
        if best is None or lex_less(cand, best):
            best = cand
    return best


def sign_canonicalize(theta) -> np.ndarray:
    """Flip theta so its first nonzero coordinate is positive; fixes 0."""
    t = np.asarray(theta, dtype=float).reshape(-1)
    for x in t:
        if x != 0.0:
            return t.copy() if x > 0.0 else -t
    return t.copy()


def polar_slice(a, index_set, min_det: float = 1e-10) -> np.ndarray:
    """Polar normalization A @ U(A_I)^T placing the I-minor in the SPD slice.

    Orbit-constant under right O(r) multiplication; fails with a chart error
    when the chosen minor is near singular.
    """
    mat = np.asarray(a, dtype=float)
    if mat.ndim != 2:
        raise DimensionError("polar_slice expects a d x r loading matrix")
    d, r = mat.shape
    idx = np.asarray(sorted(int(i) for i in index_set), dtype=int)
    if idx.shape[0] != r:
        raise ChartError(f"index set must have size r={r}, got {idx.shape[0]}")
    if idx.min() < 0 or idx.max() >= d:
        raise ChartError(f"index set out of row range 0..{d - 1}: {idx.tolist()}")
    minor = mat[idx, :]
    det = float(np.linalg.det(minor))
    if abs(det) <= min_det:
        raise ChartError(
            f"chart minor det {det:.3e} is within {min_det:.1e} of singular; "
            "choose another index set"
        )
    u, _h = polar_factors(minor)
    return mat @ u.T


class LexSection:
    """Canonical-representative map for a finite action (lex orbit minimum)."""

    def __init__(self, action: GroupAction):
        if not action.finite:
            raise CapacityError("LexSection requires a finite action")
        self.action = action

    def apply(self, theta: np.ndarray) -> np.ndarray:
        return canonical_section_finite(theta, self.action)

    def is_canonical(self, theta: np.ndarray) -> bool:
        t = self.action.layout.check(theta)
        return bool(np.array_equal(self.apply(t), t))


class SignSection:
    """Sign-flip representative with positive leading nonzero coordinate."""

    def __init__(self, action: SignAction):
        self.action = action

    def apply(self, theta: np.ndarray) -> np.ndarray:
        return sign_canonicalize(self.action.layout.check(theta))

    def is_canonical(self, theta: np.ndarray) -> bool:
        t = self.action.layout.check(theta)
        return bool(np.array_equal(self.apply(t), t))


class PolarSection:
    """Canonical-representative map for the right O(r) action on a chart."""

    def __init__(self, action: OrthogonalAction, index_set=None, atol: float = 1e-9):
        self.action = action
        b = action.layout.block(action.loading_block)
        self.index_set = tuple(range(action.r)) if index_set is None else tuple(index_set)
        self._block = b
        self.atol = atol

    def apply(self, theta: np.ndarray) -> np.ndarray:
        t = self.action.layout.check(theta).copy()
        a = t[self._block.sl].reshape(self._block.shape)
        t[self._block.sl] = polar_slice(a, self.index_set).reshape(-1)
        return t

    def is_canonical(self, theta: np.ndarray) -> bool:
        t = self.action.layout.check(theta)
        scale = 1.0 + float(np.linalg.norm(t))
        return float(np.linalg.norm(self.apply(t) - t)) <= self.atol * scale


def section_for(action: GroupAction, index_set=None):
    """Default canonical section for the given action kind.

    Sign actions use the positive-leading-coordinate rule (the operational
    slice for the sign mixture); other finite actions use the lexicographic
    orbit minimum; the O(r) action uses the polar chart normalization.
    """
    if isinstance(action, SignAction):
        return SignSection(action)
    if action.finite:
        return LexSection(action)
    if isinstance(action, OrthogonalAction):
        return PolarSection(action, index_set=index_set)
    raise CapacityError(f"no section rule for action {type(action).__name__}")
