"""
src/group/rep.py
Finite groups of orthogonal matrices acting linearly on R^d.
Exports: GroupRep, GroupCheck, GroupCheckReport, make_cyclic_rotation_group, make_dihedral_group,
         make_trivial_group, group_from_matrices, group_from_spec, check_group, act, orbit
"""

from dataclasses import dataclass
from typing import Any

import numpy as np

ORTHOGONALITY_TOL = 1e-10
CLOSURE_TOL = 1e-9
IDENTITY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class GroupRep:
    """Ordered element list; the Haar measure is the uniform weight 1/|G|."""

    dim: int
    elements: tuple[np.ndarray, ...]
    identity_index: int = 0
    name: str = "group"

    @property
    def order(self) -> int:
        return len(self.elements)


@dataclass
class GroupCheck:
    """One named validation with its worst-case residual."""

    name: str
    passed: bool
    residual: float
    tolerance: float


@dataclass
class GroupCheckReport:
    """Pass/fail for orthogonality, closure, inverse and identity."""

    group: str
    checks: list[GroupCheck]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def failures(self) -> list[str]:
        return [check.name for check in self.checks if not check.passed]


def _snap(matrix: np.ndarray) -> np.ndarray:
    """Round entries within 1e-12 of an integer, so that e.g. cos(pi/2) is exactly 0."""
    rounded = np.rint(matrix)
    return np.where(np.abs(matrix - rounded) < 1e-12, rounded, matrix)


def _rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return _snap(np.array([[c, -s], [s, c]]))


def _nearest_residual(target: np.ndarray, elements: tuple[np.ndarray, ...]) -> float:
    return min(float(np.max(np.abs(target - e))) for e in elements)


def check_group(rep: GroupRep) -> GroupCheckReport:
    """
    Validate the group axioms numerically.

    Args:
        rep: Representation to check.
    Returns:
        Report with the worst residual of each check; never raises for a failed check.
    """
    eye = np.eye(rep.dim)
    elements = rep.elements
    if not elements:
        return GroupCheckReport(rep.name, [GroupCheck("nonempty", False, float("inf"), 0.0)])
    ortho = max(float(np.max(np.abs(a.T @ a - eye))) for a in elements)
    closure = max(_nearest_residual(a @ b, elements) for a in elements for b in elements)
    inverse = max(_nearest_residual(a.T, elements) for a in elements)
    if 0 <= rep.identity_index < len(elements):
        identity = float(np.max(np.abs(elements[rep.identity_index] - eye)))
    else:
        identity = float("inf")
    checks = [
        GroupCheck("orthogonality", ortho <= ORTHOGONALITY_TOL, ortho, ORTHOGONALITY_TOL),
        GroupCheck("closure", closure <= CLOSURE_TOL, closure, CLOSURE_TOL),
        GroupCheck("inverse", inverse <= CLOSURE_TOL, inverse, CLOSURE_TOL),
        GroupCheck("identity", identity <= IDENTITY_TOL, identity, IDENTITY_TOL),
    ]
    return GroupCheckReport(rep.name, checks)


def group_from_matrices(matrices: list[Any], name: str = "matrices") -> GroupRep:
    """
    Build and validate a representation from an explicit matrix list.

    Raises:
        ValueError: Shapes disagree, or any group check fails.
    """
    elements = tuple(np.asarray(m, dtype=float) for m in matrices)
    if not elements:
        raise ValueError("A group needs at least one element.")
    dim = elements[0].shape[0]
    if any(e.shape != (dim, dim) for e in elements):
        raise ValueError("All group matrices must be square with the same size.")
    eye = np.eye(dim)
    identity_index = min(range(len(elements)), key=lambda i: float(np.max(np.abs(elements[i] - eye))))
    rep = GroupRep(dim=dim, elements=elements, identity_index=identity_index, name=name)
    report = check_group(rep)
    if not report.passed:
        raise ValueError(f"Matrices do not form an orthogonal group: failed {report.failures()}")
    return rep


def make_cyclic_rotation_group(k: int) -> GroupRep:
    """
    Rotations of the plane by 2*pi*j/k, j = 0..k-1, identity first.

    Raises:
        ValueError: k < 1.
    """
    if k < 1:
        raise ValueError(f"Cyclic group order must be >= 1, got {k}")
    elements = tuple(_rotation(2.0 * np.pi * j / k) for j in range(k))
    return GroupRep(dim=2, elements=elements, identity_index=0, name=f"C{k}")


def make_dihedral_group(k: int) -> GroupRep:
    """Rotations by 2*pi*j/k followed by the reflections across lines at angle pi*j/k."""
    if k < 1:
        raise ValueError(f"Dihedral group parameter must be >= 1, got {k}")
    rotations = [_rotation(2.0 * np.pi * j / k) for j in range(k)]
    flip = np.diag([1.0, -1.0])
    reflections = [_snap(r @ flip) for r in rotations]
    return GroupRep(dim=2, elements=tuple(rotations + reflections), identity_index=0, name=f"D{k}")


def make_trivial_group(dim: int = 2) -> GroupRep:
    return GroupRep(dim=dim, elements=(np.eye(dim),), identity_index=0, name="trivial")


def group_from_spec(spec: dict[str, Any]) -> GroupRep:
    """
    Build a group from a config mapping.

    Accepted kinds: cyclic (k), dihedral (k), trivial (dim), matrices (matrices).
    """
    kind = str(spec.get("kind", "")).strip().lower()
    if kind == "cyclic":
        return make_cyclic_rotation_group(int(spec.get("k", 4)))
    if kind == "dihedral":
        return make_dihedral_group(int(spec.get("k", 4)))
    if kind == "trivial":
        return make_trivial_group(int(spec.get("dim", 2)))
    if kind == "matrices":
        return group_from_matrices(spec.get("matrices") or [], name=str(spec.get("name", "matrices")))
    raise ValueError(f"Unknown group kind: {kind!r}")


def act(rep: GroupRep, g: int, points: np.ndarray) -> np.ndarray:
    """Apply A_g to every row of `points`."""
    return np.asarray(points, dtype=float) @ rep.elements[g].T


def orbit(rep: GroupRep, x: np.ndarray) -> np.ndarray:
    """(|G|, d) array of A_g x in element order."""
    x = np.asarray(x, dtype=float)
    return np.stack([a @ x for a in rep.elements])
