"""Synthetic proprioceptive pointing data.

A six-joint right arm (torso yaw, torso pitch, three shoulder joints and the
elbow) points at 20 targets spread along a horizontal line in front of the
body. Joint configurations come from a damped-least-squares inverse
kinematics solve with a fixed start pose and a fixed iteration count, so the
whole pipeline is a pure function of the arm geometry. The 20 pointing
postures plus the rest posture are reduced to three principal components and
scaled into ``[-1, 1]``; those 21 vectors are the canonical gesture signals.

Frame convention: origin at the hip, x forward, y to the robot's left, z up.
Target 0 is the leftmost point of the line and target 19 the rightmost.
"""
from __future__ import annotations

import functools
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .numerics import pca_fit

N_POSITIONS = 20
N_JOINTS = 6
N_COMPONENTS = 3
BASE = N_POSITIONS  # row index of the rest posture in the table
MIN_VARIANCE_FRACTION = 0.97

TABLE_FORMAT = "pointcount.gesture_table"
TABLE_VERSION = 1

JOINT_NAMES = ("torso_yaw", "torso_pitch", "shoulder_pitch", "shoulder_roll", "shoulder_yaw", "elbow")


class ArmConfigurationError(ValueError):
    """The arm geometry cannot produce a usable gesture table."""


def _rot(axis: str, angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    if axis == "x":
        return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    if axis == "y":
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


# Rotation axis of each joint in its own local frame. Shoulder pitch turns
# about -y so that a positive angle swings the hanging arm forward.
_AXES = ("z", "y", "y", "x", "z", "y")
_SIGNS = (1.0, 1.0, -1.0, 1.0, 1.0, -1.0)


@dataclass(frozen=True)
class ArmModel:
    """Geometry of the synthetic pointing arm (lengths in metres, angles in radians).

    Construction validates the geometry: every target on the line must be
    reachable to within ``tolerance`` by :func:`solve_pointing`.
    """

    upper_arm: float = 0.15
    forearm: float = 0.14
    shoulder_height: float = 0.20
    shoulder_offset: float = 0.08
    line_forward: float = 0.30
    line_height: float = 0.15
    line_length: float = 0.30
    n_targets: int = N_POSITIONS
    preferred_pose: tuple = (0.0, 0.3, 1.2, 0.2, 0.0, 0.4)
    ik_iterations: int = 300
    ik_damping: float = 0.02
    nullspace_gain: float = 0.1
    tolerance: float = 1e-3

    def __post_init__(self):
        for name in ("upper_arm", "forearm", "shoulder_height", "line_length"):
            if not getattr(self, name) > 0.0:
                raise ArmConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_targets != N_POSITIONS:
            raise ArmConfigurationError(f"the pointing line has exactly {N_POSITIONS} targets")
        if len(self.preferred_pose) != N_JOINTS:
            raise ArmConfigurationError(f"preferred_pose needs {N_JOINTS} joint angles")
        for i in range(self.n_targets):
            q = _solve(self, i)
            err = np.linalg.norm(forward_kinematics(self, q) - self.target(i))
            if not err <= self.tolerance:
                raise ArmConfigurationError(
                    f"target {i} unreachable: fingertip residual {err:.4g} m exceeds {self.tolerance} m")

    def target(self, index: int) -> np.ndarray:
        if not 0 <= index < self.n_targets:
            raise IndexError(f"target index {index} out of range 0..{self.n_targets - 1}")
        half = self.line_length / 2.0
        y = half - index * self.line_length / (self.n_targets - 1)
        return np.array([self.line_forward, y, self.line_height])

    @property
    def targets(self) -> np.ndarray:
        return np.stack([self.target(i) for i in range(self.n_targets)])

    def to_dict(self) -> dict:
        d = asdict(self)
        d["preferred_pose"] = list(self.preferred_pose)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ArmModel":
        d = dict(d)
        if "preferred_pose" in d:
            d["preferred_pose"] = tuple(float(x) for x in d["preferred_pose"])
        return cls(**d)


def _chain(arm: ArmModel, q):
    """Joint origins, world-frame joint axes and fingertip position."""
    links = [
        np.zeros(3),  # hip -> torso yaw
        np.zeros(3),  # torso yaw -> torso pitch
        np.array([0.0, -arm.shoulder_offset, arm.shoulder_height]),
        np.zeros(3),
        np.zeros(3),
        np.array([0.0, 0.0, -arm.upper_arm]),
    ]
    unit = {"x": np.array([1.0, 0.0, 0.0]), "y": np.array([0.0, 1.0, 0.0]), "z": np.array([0.0, 0.0, 1.0])}
    rot = np.eye(3)
    pos = np.zeros(3)
    origins, axes = [], []
    for j in range(N_JOINTS):
        pos = pos + rot @ links[j]
        origins.append(pos)
        axes.append(_SIGNS[j] * (rot @ unit[_AXES[j]]))
        rot = rot @ _rot(_AXES[j], _SIGNS[j] * q[j])
    tip = pos + rot @ np.array([0.0, 0.0, -arm.forearm])
    return origins, axes, tip


def forward_kinematics(arm: ArmModel, joints) -> np.ndarray:
    """Fingertip position for a 6-vector of joint angles."""
    q = np.asarray(joints, dtype=float)
    if q.shape != (N_JOINTS,):
        raise ValueError(f"expected {N_JOINTS} joint angles, got shape {q.shape}")
    return _chain(arm, q)[2]


def _jacobian(arm: ArmModel, q) -> tuple[np.ndarray, np.ndarray]:
    origins, axes, tip = _chain(arm, q)
    jac = np.column_stack([np.cross(a, tip - o) for a, o in zip(axes, origins)])
    return jac, tip


@functools.lru_cache(maxsize=256)
def _solve_cached(arm: ArmModel, index: int) -> np.ndarray:
    goal = arm.target(index)
    q_pref = np.asarray(arm.preferred_pose, dtype=float)
    q = q_pref.copy()
    lam2 = arm.ik_damping ** 2
    eye = np.eye(N_JOINTS)
    for _ in range(arm.ik_iterations):
        jac, tip = _jacobian(arm, q)
        pinv = jac.T @ np.linalg.inv(jac @ jac.T + lam2 * np.eye(3))
        q = q + pinv @ (goal - tip) + (eye - pinv @ jac) @ (arm.nullspace_gain * (q_pref - q))
    q.setflags(write=False)
    return q


def _solve(arm: ArmModel, index: int) -> np.ndarray:
    return _solve_cached(arm, index).copy()


def solve_pointing(arm: ArmModel, target_index: int) -> np.ndarray:
    """Joint angles that put the fingertip on target ``target_index``."""
    arm.target(target_index)  # range check
    return _solve(arm, target_index)


def rest_posture() -> np.ndarray:
    return np.zeros(N_JOINTS)


@dataclass
class GestureTable:
    """Canonical 3-component gesture vectors.

    Rows ``0..19`` are the pointing postures from left to right; row
    ``20`` (``BASE``) is the rest posture.
    """

    vectors: np.ndarray
    pca_basis: np.ndarray
    pca_mean: np.ndarray
    variance_fraction: float
    scale: float
    component_fractions: np.ndarray = field(default_factory=lambda: np.zeros(N_COMPONENTS))
    arm: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=float)
        if self.vectors.shape != (N_POSITIONS + 1, N_COMPONENTS):
            raise ValueError(f"gesture table must be {N_POSITIONS + 1}x{N_COMPONENTS}, got {self.vectors.shape}")
        self.vectors.setflags(write=False)

    @property
    def base(self) -> np.ndarray:
        return self.vectors[BASE]

    @property
    def positions(self) -> np.ndarray:
        return self.vectors[:N_POSITIONS]

    def project(self, joints) -> np.ndarray:
        """Map raw joint angles to the scaled gesture space."""
        return ((np.asarray(joints, dtype=float) - self.pca_mean) @ self.pca_basis) / self.scale

    def min_pairwise_distance(self) -> float:
        d = np.linalg.norm(self.vectors[:, None, :] - self.vectors[None, :, :], axis=-1)
        return float(d[np.triu_indices(len(d), 1)].min())

    def to_dict(self) -> dict:
        return {
            "format": TABLE_FORMAT,
            "version": TABLE_VERSION,
            "variance_fraction": self.variance_fraction,
            "component_fractions": self.component_fractions.tolist(),
            "scale": self.scale,
            "pca_mean": self.pca_mean.tolist(),
            "pca_basis": self.pca_basis.tolist(),
            "vectors": self.vectors.tolist(),
            "arm": self.arm,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GestureTable":
        if d.get("format") != TABLE_FORMAT:
            raise ValueError(f"not a gesture table file (format={d.get('format')!r})")
        if d.get("version") != TABLE_VERSION:
            raise ValueError(f"unsupported gesture table version {d.get('version')!r}")
        return cls(
            vectors=np.array(d["vectors"], dtype=float),
            pca_basis=np.array(d["pca_basis"], dtype=float),
            pca_mean=np.array(d["pca_mean"], dtype=float),
            variance_fraction=float(d["variance_fraction"]),
            scale=float(d["scale"]),
            component_fractions=np.array(d["component_fractions"], dtype=float),
            arm=dict(d.get("arm", {})),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "GestureTable":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _has_monotone_component(points: np.ndarray) -> bool:
    steps = np.diff(points, axis=0)
    return bool(np.any(np.all(steps > 0, axis=0) | np.all(steps < 0, axis=0)))


def build_gesture_table(arm: ArmModel | None = None) -> GestureTable:
    """Solve all 20 pointing postures, append the rest posture and reduce to 3-D."""
    arm = ArmModel() if arm is None else arm
    joints = np.vstack([np.stack([solve_pointing(arm, i) for i in range(N_POSITIONS)]), rest_posture()])
    pca = pca_fit(joints, N_COMPONENTS)
    if not pca.cumulative > MIN_VARIANCE_FRACTION:
        raise ArmConfigurationError(
            f"three components keep only {pca.cumulative:.4f} of the variance (need > {MIN_VARIANCE_FRACTION})")
    scores = pca.transform(joints)
    scale = float(np.abs(scores).max())
    vectors = scores / scale
    if not _has_monotone_component(vectors[:N_POSITIONS]):
        raise ArmConfigurationError("no gesture component sweeps monotonically across the 20 targets")
    table = GestureTable(vectors=vectors, pca_basis=pca.basis, pca_mean=pca.mean,
                         variance_fraction=pca.cumulative, scale=scale,
                         component_fractions=pca.fractions, arm=arm.to_dict())
    if not table.min_pairwise_distance() > 0.0:
        raise ArmConfigurationError("two gesture vectors coincide")
    return table
