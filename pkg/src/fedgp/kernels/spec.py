"""Kernel specification trees.

A :class:`KernelSpec` is either a leaf (one kernel family applied to the full
input vector) or an internal SUM/PRODUCT node combining child specs.
Hyper-parameters are *not* stored in the spec; they live in a flat vector of
logs of the positive quantities, laid out leaf by leaf in depth-first order:

==============  ======================  =========================================
family          parameter count (d in)  layout (all log-domain)
==============  ======================  =========================================
ARD_SE          d + 1                   [log signal_var, log len_1 .. log len_d]
PERIODIC        3                       [log signal_var, log len, log period]
NEURAL_NET      d + 1                   [log sigma2_0 .. log sigma2_d]
ARC_COSINE      0                       (order q and layer count are structural)
==============  ======================  =========================================

The ARD_SE ``len_j`` are divisors of squared distances (units of squared input
distance); PERIODIC ``len`` is the usual unitless length scale entering as
1/len^2; NEURAL_NET sigma2_i are the diagonal entries of Sigma acting on the
augmented input [1, x^T]^T, index 0 being the bias entry.

Serialization schema (JSON): a leaf is ``{"family": F, "input_dim": d}`` plus
``"q"`` and ``"layers"`` for ARC_COSINE; an internal node is
``{"op": "SUM"|"PRODUCT", "children": [...]}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..errors import ArgumentError

FAMILIES = ("ARD_SE", "PERIODIC", "NEURAL_NET", "ARC_COSINE")
OPS = ("SUM", "PRODUCT")


@dataclass(frozen=True)
class KernelSpec:
    """One node of a kernel composition tree. Immutable."""

    family: str | None = None
    input_dim: int | None = None
    q: int | None = None
    layers: int | None = None
    op: str | None = None
    children: tuple["KernelSpec", ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if self.op is not None:
            if self.family is not None:
                raise ArgumentError("a node is either a leaf (family) or an op, not both")
            if self.op not in OPS:
                raise ArgumentError(f"unknown op {self.op!r}; expected one of {OPS}")
            if len(self.children) < 1:
                raise ArgumentError(f"{self.op} node needs at least one child")
            dims = {c.dim for c in self.children}
            if len(dims) != 1:
                raise ArgumentError(f"children of a {self.op} node disagree on input_dim: {sorted(dims)}")
            return
        if self.family not in FAMILIES:
            raise ArgumentError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if self.children:
            raise ArgumentError("leaf nodes cannot have children")
        if not isinstance(self.input_dim, int) or self.input_dim < 1:
            raise ArgumentError(f"input_dim must be a positive integer, got {self.input_dim!r}")
        if self.family == "ARC_COSINE":
            if not isinstance(self.q, int) or self.q < 0:
                raise ArgumentError(f"arc-cosine order q must be an integer >= 0, got {self.q!r}")
            if self.q > 2:
                raise ArgumentError(f"arc-cosine order q={self.q} has no implemented closed form (q <= 2)")
            if not isinstance(self.layers, int) or self.layers < 1:
                raise ArgumentError(f"arc-cosine layers must be an integer >= 1, got {self.layers!r}")
        elif self.q is not None or self.layers is not None:
            raise ArgumentError(f"q/layers only apply to ARC_COSINE, not {self.family}")

    @property
    def is_leaf(self) -> bool:
        return self.op is None

    @property
    def dim(self) -> int:
        """Input dimension d shared by every leaf of this (sub)tree."""
        if self.is_leaf:
            return self.input_dim
        return self.children[0].dim

    @property
    def param_count(self) -> int:
        return param_count(self)

    def to_dict(self) -> dict:
        if self.is_leaf:
            d = {"family": self.family, "input_dim": self.input_dim}
            if self.family == "ARC_COSINE":
                d["q"] = self.q
                d["layers"] = self.layers
            return d
        return {"op": self.op, "children": [c.to_dict() for c in self.children]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def param_count(spec: KernelSpec) -> int:
    """Length of the flat hyper-parameter vector for ``spec`` (noise excluded)."""
    if spec.is_leaf:
        if spec.family == "ARD_SE" or spec.family == "NEURAL_NET":
            return spec.input_dim + 1
        if spec.family == "PERIODIC":
            return 3
        return 0  # ARC_COSINE
    return sum(param_count(c) for c in spec.children)


def leaves(spec: KernelSpec) -> list[KernelSpec]:
    """Leaves in depth-first (parameter-layout) order."""
    if spec.is_leaf:
        return [spec]
    out = []
    for c in spec.children:
        out.extend(leaves(c))
    return out


def param_slices(spec: KernelSpec) -> list[tuple[KernelSpec, slice]]:
    """(leaf, slice into the flat parameter vector) pairs in layout order."""
    out = []
    offset = 0
    for leaf in leaves(spec):
        n = param_count(leaf)
        out.append((leaf, slice(offset, offset + n)))
        offset += n
    return out


def param_names(spec: KernelSpec) -> list[str]:
    """Human-readable names for each slot of the flat parameter vector."""
    names = []
    for idx, leaf in enumerate(leaves(spec)):
        prefix = f"k{idx}."
        if leaf.family == "ARD_SE":
            names.append(prefix + "log_signal_var")
            names.extend(prefix + f"log_len_{j + 1}" for j in range(leaf.input_dim))
        elif leaf.family == "PERIODIC":
            names.extend((prefix + "log_signal_var", prefix + "log_len", prefix + "log_period"))
        elif leaf.family == "NEURAL_NET":
            names.extend(prefix + f"log_sigma2_{i}" for i in range(leaf.input_dim + 1))
    return names


def default_params(spec: KernelSpec):
    """All-zero log-parameters (every positive quantity = 1)."""
    import numpy as np

    return np.zeros(param_count(spec))


def ard_se(input_dim: int) -> KernelSpec:
    return KernelSpec(family="ARD_SE", input_dim=input_dim)


def periodic(input_dim: int = 1) -> KernelSpec:
    return KernelSpec(family="PERIODIC", input_dim=input_dim)


def neural_net(input_dim: int) -> KernelSpec:
    return KernelSpec(family="NEURAL_NET", input_dim=input_dim)


def arc_cosine(input_dim: int, q: int = 1, layers: int = 1) -> KernelSpec:
    return KernelSpec(family="ARC_COSINE", input_dim=input_dim, q=q, layers=layers)


def ksum(*children: KernelSpec) -> KernelSpec:
    return KernelSpec(op="SUM", children=tuple(children))


def kproduct(*children: KernelSpec) -> KernelSpec:
    return KernelSpec(op="PRODUCT", children=tuple(children))


def from_dict(d: dict) -> KernelSpec:
    """Inverse of :meth:`KernelSpec.to_dict`; validates keys strictly."""
    if not isinstance(d, dict):
        raise ArgumentError(f"kernel spec node must be a mapping, got {type(d).__name__}")
    if "op" in d:
        extra = set(d) - {"op", "children"}
        if extra:
            raise ArgumentError(f"unexpected keys in op node: {sorted(extra)}")
        children = d.get("children")
        if not isinstance(children, list):
            raise ArgumentError("op node needs a 'children' list")
        return KernelSpec(op=d["op"], children=tuple(from_dict(c) for c in children))
    extra = set(d) - {"family", "input_dim", "q", "layers"}
    if extra:
        raise ArgumentError(f"unexpected keys in leaf node: {sorted(extra)}")
    return KernelSpec(family=d.get("family"), input_dim=d.get("input_dim"),
                      q=d.get("q"), layers=d.get("layers"))


def from_json(s: str) -> KernelSpec:
    try:
        d = json.loads(s)
    except json.JSONDecodeError as e:
        raise ArgumentError(f"invalid kernel spec JSON: {e}") from e
    return from_dict(d)
