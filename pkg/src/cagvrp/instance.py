"""Problem instances: data container, random generation, file I/O.

An instance is a set of 2-D targets with a designated depot, a communication
radius R, symmetric ground-vehicle edge costs, directed UAV arc costs, and a
boolean communication-feasibility matrix.  Random instances follow the
standard benchmark protocol: coordinates uniform in a 100x100 grid,
ground costs Euclidean, UAV costs a scale factor alpha times ground costs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

GRID_SIDE = 100.0
DEFAULT_RADIUS = 50.0


class InstanceError(ValueError):
    """Invalid instance data (bad argument or violated invariant)."""


class InstanceFormatError(InstanceError):
    """Instance file could not be parsed."""


@dataclass(frozen=True, eq=False)
class Instance:
    """Immutable CAGVRP instance.

    Arrays are set non-writeable after construction, so instances are safe to
    share between threads.  ``comm_ok[i, j]`` is True iff target ``i`` may be
    assigned to a UAV sub-tour launched at stop ``j``; the diagonal is always
    True (a target can serve as its own stop).
    """

    name: str
    targets: np.ndarray          # (n, 2) float
    depot: int
    radius: float
    alpha: float
    gv_cost: np.ndarray          # (n, n) symmetric, zero diagonal
    uav_cost: np.ndarray         # (n, n) zero diagonal
    comm_ok: np.ndarray          # (n, n) bool, True diagonal
    explicit_costs: bool = field(default=False, compare=False)

    def __post_init__(self):
        targets = np.ascontiguousarray(self.targets, dtype=float)
        n = targets.shape[0]
        if targets.ndim != 2 or targets.shape[1] != 2:
            raise InstanceError("targets must be an (n, 2) array")
        if n < 3:
            raise InstanceError(f"targets: need n >= 3, got n = {n}")
        if not np.isfinite(targets).all():
            raise InstanceError("targets: non-finite coordinate")
        if not (0 <= self.depot < n):
            raise InstanceError(f"depot: index {self.depot} out of range for n = {n}")
        if not (self.radius > 0):
            raise InstanceError("radius: must be positive")
        if not (self.alpha > 0):
            raise InstanceError("alpha: must be positive")
        gv = np.ascontiguousarray(self.gv_cost, dtype=float)
        uav = np.ascontiguousarray(self.uav_cost, dtype=float)
        comm = np.ascontiguousarray(self.comm_ok, dtype=bool)
        for label, mat in (("gv_cost", gv), ("uav_cost", uav)):
            if mat.shape != (n, n):
                raise InstanceError(f"{label}: expected shape ({n}, {n}), got {mat.shape}")
            if not np.isfinite(mat).all():
                raise InstanceError(f"{label}: non-finite entry")
            if (mat < 0).any():
                raise InstanceError(f"{label}: negative entry")
            if np.abs(np.diag(mat)).max() != 0.0:
                raise InstanceError(f"{label}: nonzero diagonal")
        if not np.array_equal(gv, gv.T):
            raise InstanceError("gv_cost: must be symmetric")
        if comm.shape != (n, n):
            raise InstanceError(f"comm_ok: expected shape ({n}, {n}), got {comm.shape}")
        if not np.diag(comm).all():
            raise InstanceError("comm_ok: diagonal must be all True")
        for attr, arr in (("targets", targets), ("gv_cost", gv), ("uav_cost", uav), ("comm_ok", comm)):
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)

    @property
    def n(self) -> int:
        return self.targets.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.name == other.name
            and self.depot == other.depot
            and self.radius == other.radius
            and self.alpha == other.alpha
            and np.array_equal(self.targets, other.targets)
            and np.array_equal(self.gv_cost, other.gv_cost)
            and np.array_equal(self.uav_cost, other.uav_cost)
            and np.array_equal(self.comm_ok, other.comm_ok)
        )

    def __repr__(self) -> str:
        return f"Instance(name={self.name!r}, n={self.n}, alpha={self.alpha}, radius={self.radius})"


def _pairwise_distances(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    d = np.sqrt((diff * diff).sum(axis=2))
    np.fill_diagonal(d, 0.0)
    # exact symmetry, immune to summation-order effects
    return np.triu(d) + np.triu(d, 1).T


def euclidean_instance(
    points,
    depot: int = 0,
    alpha: float = 0.1,
    radius: float = DEFAULT_RADIUS,
    name: str = "",
    gv_cost: np.ndarray | None = None,
    uav_cost: np.ndarray | None = None,
) -> Instance:
    """Build an instance from explicit coordinates.

    Costs default to Euclidean distances (ground) and ``alpha`` times those
    distances (UAV); explicit cost matrices override the Euclidean ones.
    Communication feasibility is always geometric: distance <= radius.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InstanceError("points must be a sequence of (x, y) pairs")
    if pts.shape[0] < 3:
        raise InstanceError(f"targets: need n >= 3, got n = {pts.shape[0]}")
    if not np.isfinite(pts).all():
        raise InstanceError("targets: non-finite coordinate")
    dist = _pairwise_distances(pts)
    explicit = gv_cost is not None or uav_cost is not None
    gv = dist if gv_cost is None else np.asarray(gv_cost, dtype=float)
    uav = alpha * gv if uav_cost is None else np.asarray(uav_cost, dtype=float)
    comm = dist <= radius
    return Instance(
        name=name,
        targets=pts,
        depot=depot,
        radius=radius,
        alpha=alpha,
        gv_cost=gv,
        uav_cost=uav,
        comm_ok=comm,
        explicit_costs=explicit,
    )


def generate_random(n: int, seed: int, alpha: float, radius: float = DEFAULT_RADIUS, name: str | None = None) -> Instance:
    """Generate a random instance: n points uniform i.i.d. in [0, 100]^2.

    Deterministic: the PCG64 stream seeded with ``seed`` is drawn once as an
    (n, 2) row-major array (point 0 x, point 0 y, point 1 x, ...), so equal
    arguments always reproduce bit-identical instances.  The depot is point 0.
    """
    if n < 3:
        raise InstanceError(f"targets: need n >= 3, got n = {n}")
    if alpha <= 0:
        raise InstanceError("alpha: must be positive")
    if radius <= 0:
        raise InstanceError("radius: must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    pts = rng.uniform(0.0, GRID_SIDE, size=(n, 2))
    if name is None:
        name = f"rand-n{n}-s{seed}-a{alpha:g}-r{radius:g}"
    return euclidean_instance(pts, depot=0, alpha=alpha, radius=radius, name=name)


def save_instance(instance: Instance, path) -> None:
    """Write an instance as a UTF-8 JSON document.

    Cost matrices are emitted only when they override the Euclidean defaults;
    otherwise they are recomputed on load (bit-exact for identical inputs).
    """
    doc = {
        "name": instance.name,
        "targets": [[float(x), float(y)] for x, y in instance.targets],
        "depot": int(instance.depot),
        "radius": float(instance.radius),
        "alpha": float(instance.alpha),
    }
    if instance.explicit_costs:
        doc["gv_cost"] = [[float(v) for v in row] for row in instance.gv_cost]
        doc["uav_cost"] = [[float(v) for v in row] for row in instance.uav_cost]
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_instance(path) -> Instance:
    """Read an instance file written by :func:`save_instance` (or by hand)."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise InstanceFormatError(f"{path}: top-level value must be an object")
    try:
        targets = doc["targets"]
        alpha = float(doc.get("alpha", 0.1))
        radius = float(doc.get("radius", DEFAULT_RADIUS))
        depot = int(doc.get("depot", 0))
        name = str(doc.get("name", Path(path).stem))
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceFormatError(f"{path}: missing or malformed field: {exc}") from exc
    gv = doc.get("gv_cost")
    uav = doc.get("uav_cost")
    return euclidean_instance(
        targets,
        depot=depot,
        alpha=alpha,
        radius=radius,
        name=name,
        gv_cost=None if gv is None else np.asarray(gv, dtype=float),
        uav_cost=None if uav is None else np.asarray(uav, dtype=float),
    )
