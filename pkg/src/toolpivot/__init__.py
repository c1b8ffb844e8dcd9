"""Planar tool manipulation: quasi-static pivot planning, tactile slip
estimation, and closed-loop MPC, all in simulation.

Subpackage map:
    geometry    planar poses, shapes, scenes, kinematic closure
    mechanics   equilibrium residuals, friction/vertex cones, constraint reports
    nlpsolve    dense augmented-Lagrangian NLP solver
    planner     direct-transcription trajectory optimization
    estimator   tactile stiffness regression and pose regression
    plant       deterministic quasi-static simulator with slip/break events
    controller  receding-horizon tracking MPC and the closed-loop runner
    cli         scenario files, experiment orchestration, reporting
"""

__version__ = "0.1.0"
