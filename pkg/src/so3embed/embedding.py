"""Symmetrized tensor embeddings of rotation cosets.

An embedding is specified by unit vectors ``u_i``, tensor ranks ``alpha_i``
and positive weights ``beta_i``.  A coset ``[R]`` of a finite point group S
maps to the tuple with components

    beta_i / |S| * sum_{s in S} (R s u_i)^{x alpha_i},

optionally recentered by subtracting ``beta_i / (alpha_i + 1)`` times the
isotropic tensor for every even rank, which gives the push-forward of the
uniform orientation distribution mean zero.  The map is well defined on
cosets, equivariant under left multiplication, and its image lies on a sphere
whose radius depends only on the spec.

Two named parameter sets are registered per group: ``"arnold"`` (the classic
unit-weight vectors and ranks) and ``"isometric"`` (weights chosen so the
embedding preserves geodesic distance to first order).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .so3 import Coset, GOLDEN_RATIO, Rotation, SymmetryGroup, as_coset, group_elements
from .tensors import inner, invariant_tensor, outer_power, rotate_tuple, tuple_norm

__all__ = [
    "EmbeddedPoint",
    "EmbeddingSpec",
    "TABLE_GROUPS",
    "embed",
    "equivariance_defect",
    "expected_hull_dimension",
    "format_spec_document",
    "parse_spec_document",
    "radius",
    "registry_lookup",
]

TABLE_GROUPS = ("C1", "C2", "C3", "C4", "C6", "D2", "D3", "D4", "D6", "T", "O", "Y")


@dataclass(frozen=True, eq=False)
class EmbeddingSpec:
    """Parameters of one symmetrized tensor embedding.

    Parameters
    ----------
    group : SymmetryGroup
        The point group being quotiented out.
    u : tuple of 3-vectors
        Directions, one per component.  Vectors within 1e-6 of unit length
        are renormalized; anything farther off is rejected.
    alpha : tuple of int
        Tensor rank of each component, at least 1.
    beta : tuple of float
        Positive component weights.
    centered : bool
        Subtract the isotropic mean from even-rank components (default).
    """

    group: SymmetryGroup
    u: tuple[tuple[float, float, float], ...]
    alpha: tuple[int, ...]
    beta: tuple[float, ...]
    centered: bool = True

    def __post_init__(self):
        u = tuple(tuple(float(x) for x in vec) for vec in self.u)
        alpha = tuple(int(a) for a in self.alpha)
        beta = tuple(float(b) for b in self.beta)
        if not (len(u) == len(alpha) == len(beta)) or not u:
            raise ValueError("u, alpha and beta must have equal nonzero lengths")
        fixed = []
        for i, vec in enumerate(u):
            if len(vec) != 3:
                raise ValueError(f"u[{i}] is not a 3-vector")
            n = math.sqrt(sum(x * x for x in vec))
            if abs(n - 1.0) > 1e-6:
                raise ValueError(f"u[{i}] has norm {n:.8f}, more than 1e-6 away from 1")
            fixed.append(tuple(x / n for x in vec))
        for i, a in enumerate(alpha):
            if a < 1:
                raise ValueError(f"alpha[{i}] must be at least 1, got {a}")
        for i, b in enumerate(beta):
            if not b > 0.0:
                raise ValueError(f"beta[{i}] must be positive, got {b}")
        object.__setattr__(self, "u", tuple(fixed))
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def n_components(self) -> int:
        return len(self.alpha)

    @cached_property
    def u_vectors(self) -> np.ndarray:
        out = np.array(self.u, dtype=float)
        out.setflags(write=False)
        return out

    @cached_property
    def orbits(self) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
        """Per component: the distinct group-orbit vectors of ``u_i`` and their weights.

        Weights sum to 1, so the symmetrized outer power is the weighted sum
        over these vectors only; by orbit-stabilizer they are all equal.
        """
        mats = self.group.matrices
        out = []
        for vec in self.u_vectors:
            imgs = mats @ vec
            reps: list[np.ndarray] = []
            counts: list[int] = []
            for w in imgs:
                for j, r in enumerate(reps):
                    if float(np.abs(w - r).max()) < 1e-9:
                        counts[j] += 1
                        break
                else:
                    reps.append(w)
                    counts.append(1)
            v = np.array(reps)
            wts = np.array(counts, dtype=float) / len(imgs)
            v.setflags(write=False)
            wts.setflags(write=False)
            out.append((v, wts))
        return tuple(out)

    @cached_property
    def ambient_dimension(self) -> int:
        """Total entry count of the embedding tuple, sum of 3^alpha_i."""
        return int(sum(3**a for a in self.alpha))


@dataclass(frozen=True)
class EmbeddedPoint:
    """The image of one coset: a tensor tuple plus the spec that produced it."""

    value: tuple[np.ndarray, ...]
    spec: EmbeddingSpec

    @property
    def norm(self) -> float:
        return tuple_norm(self.value)

    def flatten(self) -> np.ndarray:
        """Row-major concatenation of all components into one vector."""
        return np.concatenate([t.ravel() for t in self.value])


# ---------------------------------------------------------------------------
# registry

_E1 = (1.0, 0.0, 0.0)
_E2 = (0.0, 1.0, 0.0)
_E3 = (0.0, 0.0, 1.0)
_DIAG = tuple(np.array([1.0, 1.0, 1.0]) / math.sqrt(3.0))
_VERTEX = tuple(np.array([0.0, 1.0, GOLDEN_RATIO]) / math.sqrt(1.0 + GOLDEN_RATIO**2))

_SQ2 = math.sqrt(2.0)

# Locally isometric weights.  The cyclic and dihedral values follow from the
# closed-form tangent norms (analysis.derive_beta reproduces them exactly);
# T, O and Y make the orbit Gram matrix the identity.
_ISOMETRIC_ROWS = {
    "C1": ((_E1, _E2, _E3), (1, 1, 1), (1 / _SQ2, 1 / _SQ2, 1 / _SQ2)),
    "C2": ((_E1, _E2, _E3), (1, 2, 2), (1 / _SQ2, 0.5, 0.5)),
    "C3": ((_E1, _E2), (1, 3), (math.sqrt(5.0 / 6.0), 2.0 / 3.0)),
    "C4": ((_E1, _E2), (1, 4), (1 / _SQ2, 1 / _SQ2)),
    "C6": ((_E1, _E2), (1, 6), (1 / math.sqrt(12.0), 2.0 * _SQ2 / 3.0)),
    "D2": ((_E1, _E2, _E3), (2, 2, 2), (0.5, 0.5, 0.5)),
    "D3": ((_E1, _E2), (2, 3), (math.sqrt(5.0 / 12.0), 2.0 / 3.0)),
    "D4": ((_E1, _E2), (2, 4), (0.5, 1 / _SQ2)),
    "D6": ((_E1, _E2), (2, 6), (1 / math.sqrt(24.0), 2.0 * _SQ2 / 3.0)),
    "T": ((_DIAG,), (3,), (3.0 / (2.0 * _SQ2),)),
    "O": ((_E1,), (4,), (3.0 / (2.0 * _SQ2),)),
    "Y": ((_VERTEX,), (10,), (75.0 / (8.0 * math.sqrt(95.0)),)),
}

# Classic unit-weight parameter sets, kept for comparison studies.
_ARNOLD_ROWS = {
    "C1": ((_E1, _E2, _E3), (1, 1, 1)),
    "C2": ((_E1, _E2), (1, 2)),
    "C3": ((_E1, _E2), (1, 3)),
    "C4": ((_E1, _E2), (1, 4)),
    "C6": ((_E1, _E2), (1, 6)),
    "D2": ((_E1, _E2), (2, 2)),
    "D3": ((_E2,), (3,)),
    "D4": ((_E2,), (4,)),
    "D6": ((_E2,), (6,)),
    "T": ((_DIAG,), (3,)),
    "O": ((_E1,), (4,)),
    "Y": ((_VERTEX,), (10,)),
}


@lru_cache(maxsize=None)
def registry_lookup(group_name: str, variant: str = "isometric") -> EmbeddingSpec:
    """The registered embedding spec of a tabulated group.

    Parameters
    ----------
    group_name : str
        One of ``TABLE_GROUPS``.
    variant : {"isometric", "arnold"}
        ``"isometric"`` carries the distance-preserving weights;
        ``"arnold"`` the classic unit-weight parameters.

    Returns
    -------
    EmbeddingSpec
        Centered spec; cached, so repeated lookups share orbit tables.
    """
    if group_name not in TABLE_GROUPS:
        raise ValueError(f"no registered embedding for group {group_name!r}")
    if variant == "isometric":
        u, alpha, beta = _ISOMETRIC_ROWS[group_name]
    elif variant == "arnold":
        u, alpha = _ARNOLD_ROWS[group_name]
        beta = (1.0,) * len(alpha)
    else:
        raise ValueError(f"unknown variant {variant!r}; expected 'isometric' or 'arnold'")
    return EmbeddingSpec(group_elements(group_name), u, alpha, beta)


# ---------------------------------------------------------------------------
# the embedding map


def _embedding_tuple(spec: EmbeddingSpec, rep_matrix: np.ndarray) -> list[np.ndarray]:
    comps = []
    for (vecs, wts), a, b in zip(spec.orbits, spec.alpha, spec.beta):
        imgs = vecs @ rep_matrix.T
        acc = wts[0] * outer_power(imgs[0], a)
        for w, wt in zip(imgs[1:], wts[1:]):
            acc += wt * outer_power(w, a)
        acc *= b
        if spec.centered and a % 2 == 0:
            acc = acc - (b / (a + 1)) * invariant_tensor(a)
        comps.append(acc)
    return comps


def embed(spec: EmbeddingSpec, c) -> EmbeddedPoint:
    """Embed a coset (or a rotation, read as its coset) into tensor space.

    The result does not depend on the chosen representative, and rotating the
    coset on the left rotates every tensor component accordingly.
    """
    c = as_coset(c, spec.group)
    return EmbeddedPoint(tuple(_embedding_tuple(spec, c.rep.matrix)), spec)


@lru_cache(maxsize=None)
def radius(spec: EmbeddingSpec) -> float:
    """Norm of every embedded point; constant over the whole quotient."""
    return tuple_norm(_embedding_tuple(spec, np.eye(3)))


def equivariance_defect(spec: EmbeddingSpec, r: Rotation, c) -> float:
    """Norm gap between embedding ``r [c]`` and rotating the embedding of ``[c]``.

    Zero in exact arithmetic; in floating point this stays below 1e-10 and is
    a sharp diagnostic for orientation-convention mistakes.
    """
    c = as_coset(c, spec.group)
    left = _embedding_tuple(spec, (r @ c.rep).matrix)
    right = rotate_tuple(r, _embedding_tuple(spec, c.rep.matrix))
    return math.sqrt(sum(float(np.sum((a - b) ** 2)) for a, b in zip(left, right)))


def expected_hull_dimension(spec: EmbeddingSpec) -> int:
    """Dimension bound for the affine hull of the image: sum of the
    symmetric-tensor dimensions ``C(alpha_i + 2, 2)`` minus one for every
    even rank.

    The bound is the exact hull dimension of the component maps for generic
    direction vectors; structured choices can span less.  See
    ``analysis.rank_check`` for the measured value.
    """
    return sum(math.comb(a + 2, 2) for a in spec.alpha) - sum(1 for a in spec.alpha if a % 2 == 0)


def embedded_distance(spec: EmbeddingSpec, c1, c2) -> float:
    """Euclidean distance between two embedded cosets."""
    c1 = as_coset(c1, spec.group)
    c2 = as_coset(c2, spec.group)
    a = _embedding_tuple(spec, c1.rep.matrix)
    b = _embedding_tuple(spec, c2.rep.matrix)
    return math.sqrt(sum(float(np.sum((x - y) ** 2)) for x, y in zip(a, b)))


# ---------------------------------------------------------------------------
# plain-text spec documents

_TRUE_WORDS = {"true", "yes", "1", "on"}
_FALSE_WORDS = {"false", "no", "0", "off"}


def parse_spec_document(text: str) -> EmbeddingSpec:
    """Build a spec from a key = value document.

    Recognized keys: ``group`` (required), ``k``, ``variant``, ``centered``
    and the overrides ``u`` (semicolon-separated vectors), ``alpha`` and
    ``beta``.  Overrides replace the corresponding registry fields; a group
    without a registry row must override all three.  Lines starting with
    ``#`` and blank lines are ignored.
    """
    fields: dict[str, str] = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"spec line {ln}: expected 'key = value', got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if key in fields:
            raise ValueError(f"spec line {ln}: duplicate key {key!r}")
        fields[key.lower()] = val

    unknown = set(fields) - {"group", "k", "variant", "centered", "u", "alpha", "beta"}
    if unknown:
        raise ValueError(f"unknown spec keys: {sorted(unknown)}")
    if "group" not in fields:
        raise ValueError("spec document is missing the 'group' key")

    k = int(fields["k"]) if "k" in fields else None
    group = group_elements(fields["group"], k)
    variant = fields.get("variant", "isometric")

    centered = True
    if "centered" in fields:
        word = fields["centered"].lower()
        if word in _TRUE_WORDS:
            centered = True
        elif word in _FALSE_WORDS:
            centered = False
        else:
            raise ValueError(f"centered must be true or false, got {fields['centered']!r}")

    u = alpha = beta = None
    if "u" in fields:
        u = tuple(tuple(float(x) for x in chunk.split()) for chunk in fields["u"].split(";"))
    if "alpha" in fields:
        alpha = tuple(int(x) for x in fields["alpha"].split())
    if "beta" in fields:
        beta = tuple(float(x) for x in fields["beta"].split())

    if u is None or alpha is None or beta is None:
        if group.name not in TABLE_GROUPS:
            raise ValueError(
                f"group {group.name!r} has no registry row; the spec document "
                "must provide u, alpha and beta explicitly"
            )
        row = registry_lookup(group.name, variant)
        u = u if u is not None else row.u
        alpha = alpha if alpha is not None else row.alpha
        beta = beta if beta is not None else row.beta
    return EmbeddingSpec(group, u, alpha, beta, centered=centered)


def format_spec_document(spec: EmbeddingSpec) -> str:
    """Serialize a spec to the document format accepted by :func:`parse_spec_document`."""
    lines = [f"group = {spec.group.name}"]
    lines.append("u = " + "; ".join(" ".join(f"{x:.17g}" for x in vec) for vec in spec.u))
    lines.append("alpha = " + " ".join(str(a) for a in spec.alpha))
    lines.append("beta = " + " ".join(f"{b:.17g}" for b in spec.beta))
    lines.append(f"centered = {'true' if spec.centered else 'false'}")
    return "\n".join(lines) + "\n"
