"""Quasi-static equilibrium residuals and contact-cone constraints.

Single source of truth for the force model shared by planner, controller,
and plant:

  * object balance: reaction at the pivot A, gravity, and the tool force at B
    (moments about the object CoM, so gravity drops out of the moment row);
  * tool balance: gravity, the gripper patch force (split equally between the
    two patch points), and the reaction at B (moments about the tool CoM);
  * friction cones at A, B, C1, C2 in each contact's local frame
    (y = contact normal), with line contacts folded into doubled mu;
  * the vertex cone at B expressed in the bisector frame Sigma_V.

Force variables follow the wrench convention: per knot, u = w_G (gripper
frame) and f = (w_E world, w_TO tool frame).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .geometry import (
    Configuration,
    FrictionParams,
    Scene,
    contact_points,
    cross2,
    drot2,
    rot2,
)

__all__ = [
    "Wrench2",
    "FrictionParams",
    "ConstraintReport",
    "StaticForces",
    "object_equilibrium",
    "tool_equilibrium",
    "friction_cone_slack",
    "vertex_cone_slack",
    "assemble_constraints",
    "solve_static_forces",
    "solve_contact_forces_given_grip",
    "force_feasibility",
    "TrajectoryConstraintModel",
    "EQ_LABELS",
    "INEQ_LABELS",
]

EQ_LABELS = ("obj_Fx", "obj_Fy", "obj_M", "tool_Fx", "tool_Fy", "tool_M", "grasp_link")
INEQ_LABELS = tuple(
    f"cone{c}_{part}"
    for c in ("A", "B", "C1", "C2", "V")
    for part in ("left", "right", "normal")
)
N_EQ = len(EQ_LABELS)
N_INEQ = len(INEQ_LABELS)


@dataclass(frozen=True)
class Wrench2:
    """Planar force with a declared frame tag (W, T, G, or V)."""

    f: np.ndarray
    frame: str

    def __post_init__(self):
        object.__setattr__(self, "f", np.asarray(self.f, dtype=float).reshape(2))
        if self.frame not in ("W", "T", "G", "V"):
            raise ValueError(f"unknown frame tag {self.frame!r}")

    def expect(self, frame: str) -> np.ndarray:
        if self.frame != frame:
            raise ValueError(f"wrench in frame {self.frame}, expected {frame}")
        return self.f

    def __neg__(self) -> "Wrench2":
        return Wrench2(-self.f, self.frame)


def _rotate(theta, v):
    """Rotate stacked 2-vectors v[..., 2] by stacked angles theta[...]."""
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([c * v[..., 0] - s * v[..., 1], s * v[..., 0] + c * v[..., 1]], -1)


def _drotate(theta, v):
    c, s = np.cos(theta), np.sin(theta)
    return np.stack(
        [-s * v[..., 0] - c * v[..., 1], c * v[..., 0] - s * v[..., 1]], -1
    )


# ---------------------------------------------------------------------------
# Scalar (single-configuration) operations
# ---------------------------------------------------------------------------


def object_equilibrium(
    scene: Scene, x: Configuration, w_E: Wrench2, w_TO: Wrench2
) -> np.ndarray:
    """Force/moment residual (Fx, Fy, Mz) of the object, moments about CoM."""
    fE = w_E.expect("W")
    fTO = w_TO.expect("T")
    geom = contact_points(scene, x, slip_ref=x.theta_T - x.theta_G - scene.theta_mount)
    R_T = rot2(x.theta_T)
    f_world = R_T @ fTO
    force = fE + scene.object_weight() + f_world
    moment = cross2(geom.p_A - geom.p_O, fE) + cross2(geom.p_B - geom.p_O, f_world)
    return np.array([force[0], force[1], moment])


def tool_equilibrium(
    scene: Scene, x: Configuration, w_G: Wrench2, w_OT: Wrench2
) -> np.ndarray:
    """Force/moment residual of the tool, moments about the tool CoM.

    The patch force w_G is split as w_G/2 at each of C1, C2.
    """
    fG = w_G.expect("G")
    fOT = w_OT.expect("T")
    geom = contact_points(scene, x, slip_ref=x.theta_T - x.theta_G - scene.theta_mount)
    R_T, R_G = rot2(x.theta_T), rot2(x.theta_G)
    f_grip = R_G @ fG
    f_obj = R_T @ fOT
    force = scene.tool_weight() + f_grip + f_obj
    moment = cross2(geom.p_B - geom.p_T, f_obj) + 0.5 * (
        cross2(geom.p_C1 - geom.p_T, f_grip) + cross2(geom.p_C2 - geom.p_T, f_grip)
    )
    return np.array([force[0], force[1], moment])


def friction_cone_slack(f, mu: float) -> np.ndarray:
    """Cone slacks (mu*fy - fx, mu*fy + fx, fy) for a local-frame force.

    All three entries non-negative iff the force is inside the cone. The
    caller is responsible for expressing f in the contact's local frame
    (y = contact normal).
    """
    if isinstance(f, Wrench2):
        f = f.f
    f = np.asarray(f, dtype=float)
    return np.stack(
        [mu * f[..., 1] - f[..., 0], mu * f[..., 1] + f[..., 0], f[..., 1]], -1
    )


def vertex_cone_slack(scene: Scene, x: Configuration, w_TO: Wrench2) -> np.ndarray:
    """Vertex-cone slacks of the tool-to-object force in the bisector frame."""
    fTO = w_TO.expect("T")
    psi = x.theta_T - x.theta_O - scene.vertex_frame_body_angle()
    return friction_cone_slack(rot2(psi) @ fTO, scene.friction.rho)


# ---------------------------------------------------------------------------
# Static force resolution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StaticForces:
    """Contact forces solving both equilibria at a fixed configuration."""

    w_E: np.ndarray  # world frame
    w_TO: np.ndarray  # tool frame
    w_G: np.ndarray  # gripper frame
    residual: float  # equation residual norm of the linear solve


def _static_system(scene, theta_O, theta_T, theta_G, extra_wrench=None, extra_point=None):
    """Linear system A z = b over z = (w_E, w_TO, w_G) for one configuration."""
    obj, tool = scene.obj, scene.tool
    a_O = obj.com - obj.vertices[obj.pivot_vertex]
    a_B = obj.pivot_to_contact
    R_O, R_T, R_G = rot2(theta_O), rot2(theta_T), rot2(theta_G)
    r_A = -R_O @ a_O  # p_A - p_O
    r_B = R_O @ (a_B - a_O)  # p_B - p_O
    a_tc = tool.tip_offset - tool.com
    s_T = -R_T @ tool.com  # p_S - p_T

    A = np.zeros((6, 6))
    b = np.zeros(6)
    # Object force balance.
    A[0:2, 0:2] = np.eye(2)
    A[0:2, 2:4] = R_T
    b[0:2] = -scene.object_weight()
    # Object moment about CoM.
    A[2, 0:2] = [-r_A[1], r_A[0]]
    A[2, 2:4] = np.array([-r_B[1], r_B[0]]) @ R_T
    # Tool force balance.
    A[3:5, 2:4] = -R_T
    A[3:5, 4:6] = R_G
    b[3:5] = -scene.tool_weight()
    # Tool moment about CoM.
    A[5, 2:4] = [a_tc[1], -a_tc[0]]
    A[5, 4:6] = np.array([-s_T[1], s_T[0]]) @ R_G
    if extra_wrench is not None:
        w = np.asarray(extra_wrench, dtype=float)
        p = np.asarray(extra_point, dtype=float)
        p_O = scene.object_com_world(theta_O)
        b[0:2] -= w
        b[2] -= cross2(p - p_O, w)
    return A, b


def solve_static_forces(
    scene: Scene,
    x: Configuration,
    extra_wrench=None,
    extra_point=None,
) -> StaticForces:
    """Forces balancing object and tool at a configuration.

    The system is square and generically nonsingular; a minimum-norm
    least-squares solve keeps degenerate geometries deterministic.
    """
    A, b = _static_system(
        scene, x.theta_O, x.theta_T, x.theta_G, extra_wrench, extra_point
    )
    z, *_ = np.linalg.lstsq(A, b, rcond=None)
    return StaticForces(
        w_E=z[0:2],
        w_TO=z[2:4],
        w_G=z[4:6],
        residual=float(np.linalg.norm(A @ z - b)),
    )


def solve_contact_forces_given_grip(
    scene: Scene,
    x: Configuration,
    w_G: np.ndarray,
    extra_wrench=None,
    extra_point=None,
):
    """Least-squares (w_E, w_TO) given an applied gripper wrench.

    With w_G fixed the six equilibrium equations over-determine the four
    remaining force components; the residual measures how far the applied
    wrench is from a true equilibrium.
    """
    A, b = _static_system(
        scene, x.theta_O, x.theta_T, x.theta_G, extra_wrench, extra_point
    )
    rhs = b - A[:, 4:6] @ np.asarray(w_G, dtype=float)
    z, *_ = np.linalg.lstsq(A[:, 0:4], rhs, rcond=None)
    residual = float(np.linalg.norm(A[:, 0:4] @ z - rhs))
    return z[0:2], z[2:4], residual


def force_feasibility(
    scene: Scene,
    x: Configuration,
    force_box=None,
    input_box=None,
    margin_cap: float = 1.0,
):
    """LP certificate that some force triple satisfies every constraint at x.

    Maximizes the smallest cone slack subject to exact equilibrium (and
    optional force boxes). Returns (feasible, margin, forces-or-None); a
    negative margin or LP infeasibility proves the feasible force set empty.
    """
    A, b = _static_system(scene, x.theta_O, x.theta_T, x.theta_G)
    model = TrajectoryConstraintModel(scene)
    # Cone slack rows as a linear map of z = (w_E, w_TO, w_G).
    S = np.zeros((N_INEQ, 6))
    base = model.inequalities(
        np.array([x.theta_O]),
        np.array([x.theta_T]),
        np.array([x.theta_G]),
        np.zeros((1, 2)),
        np.zeros((1, 2)),
        np.zeros((1, 2)),
    )[0]
    blocks = model.inequality_blocks(
        np.array([x.theta_O]),
        np.array([x.theta_T]),
        np.array([x.theta_G]),
        np.zeros((1, 2)),
        np.zeros((1, 2)),
        np.zeros((1, 2)),
    )[0]
    # Columns of the knot block: (thO, thT, thG, u, wE, wTO) -> pick force cols.
    S[:, 0:2] = blocks[:, 5:7]
    S[:, 2:4] = blocks[:, 7:9]
    S[:, 4:6] = blocks[:, 3:5]

    n = 7  # six forces plus the margin variable t
    c = np.zeros(n)
    c[6] = -1.0
    A_eq = np.hstack([A, np.zeros((6, 1))])
    A_ub = np.hstack([-S, np.ones((N_INEQ, 1))])
    b_ub = base  # -S z + t <= base(0) == slack(z) >= t since slacks are linear
    bounds = [(None, None)] * 6 + [(None, margin_cap)]
    if force_box is not None:
        lo, hi = force_box
        for i in range(4):
            bounds[i] = (lo[i], hi[i])
    if input_box is not None:
        lo, hi = input_box
        for i in range(2):
            bounds[4 + i] = (lo[i], hi[i])
    res = linprog(
        c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b, bounds=bounds, method="highs"
    )
    if not res.success:
        return False, -np.inf, None
    margin = float(-res.fun)
    forces = StaticForces(
        w_E=res.x[0:2], w_TO=res.x[2:4], w_G=res.x[4:6], residual=0.0
    )
    return margin >= 0.0, margin, forces


# ---------------------------------------------------------------------------
# Vectorized trajectory constraints
# ---------------------------------------------------------------------------


class TrajectoryConstraintModel:
    """Per-knot equality/inequality values and Jacobian blocks, vectorized.

    Knot variables are ordered (theta_O, theta_T, theta_G, u_x, u_y,
    w_Ex, w_Ey, w_TOx, w_TOy); Jacobian blocks have shape (K, rows, 9).
    """

    def __init__(self, scene: Scene, slip_ref: float = 0.0):
        self.scene = scene
        self.slip_ref = slip_ref
        obj, tool = scene.obj, scene.tool
        self.a_O = obj.com - obj.vertices[obj.pivot_vertex]
        self.a_B = obj.pivot_to_contact
        self.a_BO = self.a_B - self.a_O
        self.a_tc = tool.tip_offset - tool.com
        self.c_T = tool.com
        self.w_O = scene.object_weight()
        self.w_T = scene.tool_weight()
        self.phi_A = scene.env_normal - math.pi / 2
        self.phi_tip = tool.tip_frame_angle
        self.phi_V = scene.vertex_frame_body_angle()
        self.link_offset = slip_ref + scene.theta_mount
        fr = scene.friction
        self.mu = (fr.mu_A, fr.mu_B, fr.mu_C, fr.mu_C, fr.rho)

    # -- values -------------------------------------------------------------

    def equalities(self, thO, thT, thG, u, wE, wTO) -> np.ndarray:
        K = len(thO)
        out = np.zeros((K, N_EQ))
        fB = _rotate(thT, wTO)
        out[:, 0:2] = wE + self.w_O + fB
        r_A = -_rotate(thO, np.broadcast_to(self.a_O, (K, 2)))
        r_B = _rotate(thO, np.broadcast_to(self.a_BO, (K, 2)))
        out[:, 2] = cross2(r_A, wE) + cross2(r_B, fB)
        f_grip = _rotate(thG, u)
        out[:, 3:5] = self.w_T + f_grip - fB
        s_T = -_rotate(thT, np.broadcast_to(self.c_T, (K, 2)))
        out[:, 5] = -cross2(np.broadcast_to(self.a_tc, (K, 2)), wTO) + cross2(
            s_T, f_grip
        )
        out[:, 6] = thT - thG - self.link_offset
        return out

    def inequalities(self, thO, thT, thG, u, wE, wTO) -> np.ndarray:
        K = len(thO)
        out = np.zeros((K, N_INEQ))
        gA = _rotate(np.full(K, -self.phi_A), wE)
        gB = _rotate(np.full(K, -self.phi_tip), wTO)
        gV = _rotate(thT - thO - self.phi_V, wTO)
        muA, muB, muC, _, rho = self.mu
        for j, (g, mu) in enumerate(
            ((gA, muA), (gB, muB), (u / 2.0, muC), (u / 2.0, muC), (gV, rho))
        ):
            out[:, 3 * j + 0] = mu * g[:, 1] - g[:, 0]
            out[:, 3 * j + 1] = mu * g[:, 1] + g[:, 0]
            out[:, 3 * j + 2] = g[:, 1]
        return out

    # -- Jacobian blocks ------------------------------------------------------

    def equality_blocks(self, thO, thT, thG, u, wE, wTO) -> np.ndarray:
        K = len(thO)
        J = np.zeros((K, N_EQ, 9))
        cT, sT = np.cos(thT), np.sin(thT)
        cG, sG = np.cos(thG), np.sin(thG)
        dfB_dthT = _drotate(thT, wTO)
        # Object force rows.
        J[:, 0, 1] = dfB_dthT[:, 0]
        J[:, 1, 1] = dfB_dthT[:, 1]
        J[:, 0, 5] = 1.0
        J[:, 1, 6] = 1.0
        J[:, 0, 7] = cT
        J[:, 0, 8] = -sT
        J[:, 1, 7] = sT
        J[:, 1, 8] = cT
        # Object moment row.
        aO = np.broadcast_to(self.a_O, (K, 2))
        aBO = np.broadcast_to(self.a_BO, (K, 2))
        r_A = -_rotate(thO, aO)
        dr_A = -_drotate(thO, aO)
        r_B = _rotate(thO, aBO)
        dr_B = _drotate(thO, aBO)
        fB = _rotate(thT, wTO)
        J[:, 2, 0] = cross2(dr_A, wE) + cross2(dr_B, fB)
        J[:, 2, 1] = cross2(r_B, dfB_dthT)
        J[:, 2, 5] = -r_A[:, 1]
        J[:, 2, 6] = r_A[:, 0]
        J[:, 2, 7] = -r_B[:, 1] * cT + r_B[:, 0] * sT
        J[:, 2, 8] = r_B[:, 1] * sT + r_B[:, 0] * cT
        # Tool force rows.
        df_grip_dthG = _drotate(thG, u)
        J[:, 3, 1] = -dfB_dthT[:, 0]
        J[:, 4, 1] = -dfB_dthT[:, 1]
        J[:, 3, 2] = df_grip_dthG[:, 0]
        J[:, 4, 2] = df_grip_dthG[:, 1]
        J[:, 3, 3] = cG
        J[:, 3, 4] = -sG
        J[:, 4, 3] = sG
        J[:, 4, 4] = cG
        J[:, 3, 7] = -cT
        J[:, 3, 8] = sT
        J[:, 4, 7] = -sT
        J[:, 4, 8] = -cT
        # Tool moment row.
        cTv = np.broadcast_to(self.c_T, (K, 2))
        s_Tv = -_rotate(thT, cTv)
        ds_T = -_drotate(thT, cTv)
        f_grip = _rotate(thG, u)
        J[:, 5, 1] = cross2(ds_T, f_grip)
        J[:, 5, 2] = cross2(s_Tv, df_grip_dthG)
        J[:, 5, 3] = -s_Tv[:, 1] * cG + s_Tv[:, 0] * sG
        J[:, 5, 4] = s_Tv[:, 1] * sG + s_Tv[:, 0] * cG
        J[:, 5, 7] = self.a_tc[1]
        J[:, 5, 8] = -self.a_tc[0]
        # Grasp link row.
        J[:, 6, 1] = 1.0
        J[:, 6, 2] = -1.0
        return J

    def inequality_blocks(self, thO, thT, thG, u, wE, wTO) -> np.ndarray:
        K = len(thO)
        J = np.zeros((K, N_INEQ, 9))
        muA, muB, muC, _, rho = self.mu

        def cone_rows(j0, mu, dg0, dg1):
            """Scatter d(slack)/d(var) given dg0, dg1 as (K, 9) arrays."""
            J[:, j0 + 0] = mu * dg1 - dg0
            J[:, j0 + 1] = mu * dg1 + dg0
            J[:, j0 + 2] = dg1

        # Cone A: g = rot(-phi_A) w_E, constant frame.
        cA, sA = math.cos(self.phi_A), math.sin(self.phi_A)
        d0 = np.zeros((K, 9))
        d1 = np.zeros((K, 9))
        d0[:, 5], d0[:, 6] = cA, sA
        d1[:, 5], d1[:, 6] = -sA, cA
        cone_rows(0, muA, d0, d1)
        # Cone B: g = rot(-phi_tip) w_TO, constant frame.
        cB, sB = math.cos(self.phi_tip), math.sin(self.phi_tip)
        d0 = np.zeros((K, 9))
        d1 = np.zeros((K, 9))
        d0[:, 7], d0[:, 8] = cB, sB
        d1[:, 7], d1[:, 8] = -sB, cB
        cone_rows(3, muB, d0, d1)
        # Cones C1, C2: g = u / 2 in the gripper frame.
        for j0 in (6, 9):
            d0 = np.zeros((K, 9))
            d1 = np.zeros((K, 9))
            d0[:, 3] = 0.5
            d1[:, 4] = 0.5
            cone_rows(j0, muC, d0, d1)
        # Vertex cone: g = rot(psi) w_TO, psi = thT - thO - phi_V.
        psi = thT - thO - self.phi_V
        c, s = np.cos(psi), np.sin(psi)
        dpsi = _drotate(psi, wTO)
        d0 = np.zeros((K, 9))
        d1 = np.zeros((K, 9))
        d0[:, 0] = -dpsi[:, 0]
        d0[:, 1] = dpsi[:, 0]
        d0[:, 7] = c
        d0[:, 8] = -s
        d1[:, 0] = -dpsi[:, 1]
        d1[:, 1] = dpsi[:, 1]
        d1[:, 7] = s
        d1[:, 8] = c
        cone_rows(12, rho, d0, d1)
        return J


# ---------------------------------------------------------------------------
# Constraint report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstraintReport:
    """Stacked residuals/slacks of a trajectory with violation bookkeeping."""

    equality: np.ndarray  # (K, 7)
    inequality: np.ndarray  # (K, 15) cone slacks
    bound_violation: np.ndarray  # (K,) worst box-bound violation per knot
    rate_violation: np.ndarray  # (K-1,) worst inter-knot rate violation
    worst_violation: float
    worst_label: str
    knot_worst: np.ndarray  # (K,)

    @property
    def num_knots(self) -> int:
        return self.equality.shape[0]

    def summary(self) -> dict:
        return {
            "knots": int(self.num_knots),
            "worst_violation": float(self.worst_violation),
            "worst_label": self.worst_label,
            "max_equality": float(np.abs(self.equality).max()),
            "min_cone_slack": float(self.inequality.min()),
            "max_bound_violation": float(self.bound_violation.max()),
            "max_rate_violation": (
                float(self.rate_violation.max()) if len(self.rate_violation) else 0.0
            ),
        }


def assemble_constraints(
    scene: Scene,
    trajectory,
    slip_ref: float = 0.0,
    state_box=None,
    input_box=None,
    force_box=None,
    rate_bound=None,
) -> ConstraintReport:
    """Evaluate every per-knot constraint of a trajectory and localize the worst.

    ``trajectory`` needs array attributes states (K,3), inputs (K,2),
    forces (K,4). Optional boxes are (lo, hi) pairs; ``rate_bound`` is the
    per-step angle increment limit.
    """
    X = np.asarray(trajectory.states, dtype=float)
    U = np.asarray(trajectory.inputs, dtype=float)
    F = np.asarray(trajectory.forces, dtype=float)
    K = X.shape[0]
    if U.shape[0] != K or F.shape[0] != K:
        raise ValueError("trajectory arrays must share the knot dimension")
    if not (np.isfinite(X).all() and np.isfinite(U).all() and np.isfinite(F).all()):
        raise ValueError("trajectory contains non-finite entries")

    model = TrajectoryConstraintModel(scene, slip_ref)
    thO, thT, thG = X[:, 0], X[:, 1], X[:, 2]
    wE, wTO = F[:, 0:2], F[:, 2:4]
    eq = model.equalities(thO, thT, thG, U, wE, wTO)
    ineq = model.inequalities(thO, thT, thG, U, wE, wTO)

    bound_v = np.zeros(K)
    for box, arr in ((state_box, X), (input_box, U), (force_box, F)):
        if box is None:
            continue
        lo, hi = np.asarray(box[0], dtype=float), np.asarray(box[1], dtype=float)
        over = np.maximum(arr - hi, 0.0).max(axis=1)
        under = np.maximum(lo - arr, 0.0).max(axis=1)
        bound_v = np.maximum(bound_v, np.maximum(over, under))

    if rate_bound is not None and K > 1:
        steps = np.abs(np.diff(X, axis=0))
        rate_v = np.maximum(steps - rate_bound, 0.0).max(axis=1)
    else:
        rate_v = np.zeros(max(K - 1, 0))

    eq_v = np.abs(eq)
    cone_v = np.maximum(-ineq, 0.0)
    knot_worst = np.maximum(eq_v.max(axis=1), cone_v.max(axis=1))
    knot_worst = np.maximum(knot_worst, bound_v)
    if len(rate_v):
        knot_worst[1:] = np.maximum(knot_worst[1:], rate_v)

    worst = float(knot_worst.max()) if K else 0.0
    k_star = int(knot_worst.argmax()) if K else 0
    label = "none"
    if K:
        candidates = [
            (eq_v[k_star].max(), EQ_LABELS[int(eq_v[k_star].argmax())]),
            (cone_v[k_star].max(), INEQ_LABELS[int(cone_v[k_star].argmax())]),
            (bound_v[k_star], "bounds"),
        ]
        if len(rate_v) and k_star > 0:
            candidates.append((rate_v[k_star - 1], "rate"))
        label = f"knot {k_star}: {max(candidates)[1]}"
    return ConstraintReport(
        equality=eq,
        inequality=ineq,
        bound_violation=bound_v,
        rate_violation=rate_v,
        worst_violation=worst,
        worst_label=label,
        knot_worst=knot_worst,
    )
