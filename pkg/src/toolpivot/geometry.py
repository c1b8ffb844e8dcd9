"""Planar frames, shapes, and the kinematic closure of the pivot mechanism.

Conventions (fixed for the whole package):
  * World frame W: gravity along -y, g = 9.81 m/s^2.
  * Angles are radians, wrapped to (-pi, pi]; rotations are CCW-positive.
  * The object pivots about a vertex A anchored at a fixed world point p_A.
  * The tool frame has its origin at the grasp center S and its x-axis along
    the tool; the tip sits at ``tip_offset`` in that frame.
  * theta_T = theta_G + theta_S + theta_mount ties tool, gripper, and grasp
    slip together; planning-side code assumes a fixed reference slip
    (normally zero) while the plant owns the true slip state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GRAVITY = 9.81

# Angle from tool frame to the tip contact frame (local y = face normal
# pointing from the tool face into the object), per tip shape.
TIP_FRAME_ANGLE = {
    "flat": 0.0,
    "edge": 0.0,
    "hook": math.pi,
    "rod": -math.pi / 2,
}


class ClosureError(ValueError):
    """Raised when a configuration's kinematic chain cannot close on p_B."""


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.remainder(theta, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def rot2(theta):
    """2x2 CCW rotation matrix; accepts scalars or arrays (stacked last)."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def drot2(theta):
    """d/dtheta of rot2."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[-s, -c], [c, -s]])


def cross2(a, b):
    """Planar cross product a_x*b_y - a_y*b_x (z-moment of b applied at a)."""
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


@dataclass(frozen=True)
class Pose2:
    """Planar rigid transform: rotation (radians) then translation (meters)."""

    rotation: float
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", wrap_angle(float(self.rotation)))
        object.__setattr__(
            self, "translation", np.asarray(self.translation, dtype=float).reshape(2)
        )

    @classmethod
    def identity(cls) -> "Pose2":
        return cls(0.0, np.zeros(2))

    def matrix(self) -> np.ndarray:
        T = np.eye(3)
        T[:2, :2] = rot2(self.rotation)
        T[:2, 2] = self.translation
        return T

    def apply(self, point) -> np.ndarray:
        return rot2(self.rotation) @ np.asarray(point, dtype=float) + self.translation

    def compose(self, other: "Pose2") -> "Pose2":
        return Pose2(
            self.rotation + other.rotation,
            self.apply(other.translation),
        )

    def inverse(self) -> "Pose2":
        return Pose2(-self.rotation, -(rot2(-self.rotation) @ self.translation))


@dataclass(frozen=True)
class ObjectShape:
    """Simple CCW polygon with a pivot vertex and a tool-contact vertex.

    ``r_O`` (pivot-to-contact distance) and the contact vertex geometry are
    derived from the polygon, never stored independently, so estimator and
    planner always agree with the shape.
    """

    vertices: np.ndarray
    mass: float
    com: np.ndarray
    pivot_vertex: int
    contact_vertex: int

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "com", np.asarray(self.com, dtype=float).reshape(2))
        if self.mass <= 0:
            raise ValueError("object mass must be positive")
        if not (0 <= self.pivot_vertex < len(verts)):
            raise ValueError("pivot_vertex out of range")
        if not (0 <= self.contact_vertex < len(verts)):
            raise ValueError("contact_vertex out of range")
        if self.pivot_vertex == self.contact_vertex:
            raise ValueError("pivot and contact vertex must differ")
        if _polygon_self_intersects(verts):
            raise ValueError("object polygon must be simple")

    @property
    def r_O(self) -> float:
        d = self.vertices[self.contact_vertex] - self.vertices[self.pivot_vertex]
        return float(np.hypot(d[0], d[1]))

    @property
    def pivot_to_contact(self) -> np.ndarray:
        """Body-frame vector from pivot vertex A to contact vertex B."""
        return self.vertices[self.contact_vertex] - self.vertices[self.pivot_vertex]

    @property
    def contact_bearing(self) -> float:
        """Body-frame angle of the A->B direction."""
        d = self.pivot_to_contact
        return math.atan2(d[1], d[0])

    def interior_angle(self, index: int) -> float:
        """Interior angle of the polygon at a vertex, in (0, 2*pi)."""
        verts = self.vertices
        n = len(verts)
        prev_v = verts[(index - 1) % n] - verts[index]
        next_v = verts[(index + 1) % n] - verts[index]
        ang = math.atan2(cross2(next_v, prev_v), float(next_v @ prev_v))
        return ang % (2.0 * math.pi)

    def vertex_bisector(self, index: int) -> float:
        """Body-frame angle of the inward bisector at a vertex.

        The bisector points into the material of the object; it is the axis of
        the cone of forces a pushing contact can transmit at that vertex.
        """
        verts = self.vertices
        n = len(verts)
        prev_u = _unit(verts[(index - 1) % n] - verts[index])
        next_u = _unit(verts[(index + 1) % n] - verts[index])
        b = prev_u + next_u
        if np.hypot(b[0], b[1]) < 1e-12:
            raise ValueError("degenerate (straight) vertex has no bisector")
        return math.atan2(b[1], b[0])

    def vertex_cone_ratio(self, index: int) -> float:
        """tan of the half-opening of the vertex normal cone (rho)."""
        alpha = self.interior_angle(index)
        return math.tan((math.pi - alpha) / 2.0)


@dataclass(frozen=True)
class ToolShape:
    """Grasped tool: grasp center S at the frame origin, tip at tip_offset."""

    tip_offset: np.ndarray
    tip_type: str
    patch_half_width: float
    mass: float
    com: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "tip_offset", np.asarray(self.tip_offset, dtype=float).reshape(2)
        )
        object.__setattr__(self, "com", np.asarray(self.com, dtype=float).reshape(2))
        if self.tip_type not in TIP_FRAME_ANGLE:
            raise ValueError(f"unknown tip_type {self.tip_type!r}")
        if self.patch_half_width <= 0:
            raise ValueError("patch_half_width must be positive")
        if self.mass < 0:
            raise ValueError("tool mass must be non-negative")

    @property
    def tip_frame_angle(self) -> float:
        return TIP_FRAME_ANGLE[self.tip_type]


@dataclass(frozen=True)
class Configuration:
    """World-frame orientations of object, tool, and gripper."""

    theta_O: float
    theta_T: float
    theta_G: float

    def __post_init__(self):
        object.__setattr__(self, "theta_O", wrap_angle(float(self.theta_O)))
        object.__setattr__(self, "theta_T", wrap_angle(float(self.theta_T)))
        object.__setattr__(self, "theta_G", wrap_angle(float(self.theta_G)))

    def as_array(self) -> np.ndarray:
        return np.array([self.theta_O, self.theta_T, self.theta_G])

    @classmethod
    def from_array(cls, arr) -> "Configuration":
        arr = np.asarray(arr, dtype=float).reshape(3)
        return cls(arr[0], arr[1], arr[2])


@dataclass(frozen=True)
class FrictionParams:
    """Friction coefficients per contact plus the vertex-cone ratio rho.

    mu_A / mu_B are the effective line-contact coefficients, derived as twice
    the point coefficients; they are stored and re-checked so downstream code
    can use either form.
    """

    mu_A_point: float
    mu_B_point: float
    mu_C: float
    rho: float
    mu_A: float = field(default=None)
    mu_B: float = field(default=None)

    def __post_init__(self):
        for name in ("mu_A_point", "mu_B_point", "mu_C", "rho"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        derived_A = 2.0 * self.mu_A_point
        derived_B = 2.0 * self.mu_B_point
        if self.mu_A is None:
            object.__setattr__(self, "mu_A", derived_A)
        if self.mu_B is None:
            object.__setattr__(self, "mu_B", derived_B)
        if abs(self.mu_A - derived_A) > 1e-12 or abs(self.mu_B - derived_B) > 1e-12:
            raise ValueError("effective mu must equal 2 * point mu")


@dataclass(frozen=True)
class Scene:
    """Everything the mechanics needs: shapes, anchor, friction, conventions.

    ``p_A`` is the world anchor of the pivot vertex for the current pivot
    segment (sticking contact). ``env_normal`` is the world angle of the
    environment surface normal at A (pi/2 for a floor). ``theta_mount`` is
    the fixed tool-in-gripper mounting angle.
    """

    obj: ObjectShape
    tool: ToolShape
    friction: FrictionParams
    p_A: np.ndarray
    env_normal: float = math.pi / 2
    theta_mount: float = 0.0
    gravity: float = GRAVITY

    def __post_init__(self):
        object.__setattr__(self, "p_A", np.asarray(self.p_A, dtype=float).reshape(2))

    @property
    def r_O(self) -> float:
        return self.obj.r_O

    def object_weight(self) -> np.ndarray:
        return np.array([0.0, -self.obj.mass * self.gravity])

    def tool_weight(self) -> np.ndarray:
        return np.array([0.0, -self.tool.mass * self.gravity])

    def contact_point_B(self, theta_O: float) -> np.ndarray:
        """World position of the contact vertex B for a given object angle."""
        return self.p_A + rot2(theta_O) @ self.obj.pivot_to_contact

    def object_com_world(self, theta_O: float) -> np.ndarray:
        a = self.obj.com - self.obj.vertices[self.obj.pivot_vertex]
        return self.p_A + rot2(theta_O) @ a

    def vertex_frame_body_angle(self) -> float:
        """Body-frame rotation of the vertex frame Sigma_V (y = bisector)."""
        return self.obj.vertex_bisector(self.obj.contact_vertex) - math.pi / 2

    def grasp_center(self, theta_O: float, theta_T: float) -> np.ndarray:
        """World grasp center S with the tip held on vertex B."""
        return self.contact_point_B(theta_O) - rot2(theta_T) @ self.tool.tip_offset

    def theta_T_from_gripper(self, theta_G: float, theta_S: float = 0.0) -> float:
        return theta_G + theta_S + self.theta_mount


@dataclass(frozen=True)
class ContactGeometry:
    """All contact points of one configuration, world frame."""

    p_A: np.ndarray
    p_B: np.ndarray
    p_O: np.ndarray
    p_T: np.ndarray
    p_S: np.ndarray
    p_C1: np.ndarray
    p_C2: np.ndarray
    vertex_frame: Pose2


def contact_points(
    scene: Scene, x: Configuration, slip_ref: float = 0.0
) -> ContactGeometry:
    """Map a configuration to every contact point via the closed chain.

    Raises ClosureError when the gripper-side chain (theta_G + slip + mount)
    cannot place the tip on p_B to within 1e-9 m, i.e. the configuration
    violates the grasp link.
    """
    chain_theta_T = scene.theta_T_from_gripper(x.theta_G, slip_ref)
    tip_len = float(np.hypot(*scene.tool.tip_offset))
    gap = 2.0 * abs(math.sin(wrap_angle(x.theta_T - chain_theta_T) / 2.0)) * tip_len
    if gap > 1e-9:
        raise ClosureError(
            f"tool tip misses p_B by {gap:.3e} m: theta_T={x.theta_T:.6f} "
            f"inconsistent with gripper chain {chain_theta_T:.6f}"
        )

    p_B = scene.contact_point_B(x.theta_O)
    p_O = scene.object_com_world(x.theta_O)
    R_T = rot2(x.theta_T)
    p_S = p_B - R_T @ scene.tool.tip_offset
    p_T = p_S + R_T @ scene.tool.com
    axis = R_T @ np.array([scene.tool.patch_half_width, 0.0])
    vertex_rot = x.theta_O + scene.vertex_frame_body_angle()
    return ContactGeometry(
        p_A=scene.p_A.copy(),
        p_B=p_B,
        p_O=p_O,
        p_T=p_T,
        p_S=p_S,
        p_C1=p_S + axis,
        p_C2=p_S - axis,
        vertex_frame=Pose2(vertex_rot, p_B),
    )


def gripper_pose_from_chain(scene: Scene, x: Configuration, theta_S: float) -> Pose2:
    """Gripper pose ^W_S T that closes the observation chain on p_B.

    Inverse of the tip chain: composing the returned pose with the slip
    rotation and the tool kinematics reproduces p_B exactly.
    """
    theta_tool = scene.theta_T_from_gripper(x.theta_G, theta_S)
    p_B = scene.contact_point_B(x.theta_O)
    p_S = p_B - rot2(theta_tool) @ scene.tool.tip_offset
    return Pose2(x.theta_G, p_S)


def tip_from_gripper_pose(scene: Scene, gripper: Pose2, theta_S: float) -> np.ndarray:
    """Forward observation chain: gripper pose + slip -> world tip point."""
    theta_tool = scene.theta_T_from_gripper(gripper.rotation, theta_S)
    return gripper.translation + rot2(theta_tool) @ scene.tool.tip_offset


def _unit(v: np.ndarray) -> np.ndarray:
    n = float(np.hypot(v[0], v[1]))
    if n == 0.0:
        raise ValueError("zero-length edge")
    return v / n


def _polygon_self_intersects(verts: np.ndarray) -> bool:
    """Brute-force segment intersection test for polygon simplicity."""
    n = len(verts)
    if n < 3:
        return True
    edges = [(verts[i], verts[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_cross(*edges[i], *edges[j]):
                return True
    return False


def _segments_cross(p1, p2, q1, q2) -> bool:
    d1 = cross2(p2 - p1, q1 - p1)
    d2 = cross2(p2 - p1, q2 - p1)
    d3 = cross2(q2 - q1, p1 - q1)
    d4 = cross2(q2 - q1, p2 - q1)
    return (d1 * d2 < 0) and (d3 * d4 < 0)
