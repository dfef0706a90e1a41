"""Unprojected augmented solvers.

Both methods grow the Krylov space with the plain operator (no projector
inside the Arnoldi loop) and fold the augmentation space in afterwards: a
reduced j x j (or normal-equations) system gives the Krylov correction, a
small coupling solve gives the augmentation correction.

``rfom`` imposes a Galerkin constraint against the Krylov space and the
augmentation basis; ``rgmres`` minimizes the residual over the sum of the
Krylov space and the augmentation space, assuming the image columns are
orthonormal.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .arnoldi import arnoldi, as_operator
from .augmented import (
    AugmentationSpace,
    Constraint,
    build_augmentation,
    compute_coupling,
    projected_residual,
    z_correction,
)
from .baseline import (
    DRIFT_CHECK_EVERY,
    DRIFT_WARN_RTOL,
    STAGNATION_RTOL,
    SolveResult,
    SolverBreakdownError,
    SolverConfig,
    _apply_cycle_update,
    _fom_correction,
    _gmres_correction,
    inner_residual_norms,
)
from .core import (
    RankDeficientError,
    SingularMatrixError,
    check_finite,
    dense_solve,
)

__all__ = [
    "AugmentedSolveResult",
    "unproj_rfom_cycle",
    "unproj_rgmres_cycle",
    "unproj_solve",
]


@dataclass
class AugmentedSolveResult(SolveResult):
    """Solve outcome plus the per-cycle augmentation correction norms."""

    z_norms: list = field(default_factory=list)
    k_used: int = 0
    final_decomposition: object = None


def unproj_rfom_cycle(a, aug: AugmentationSpace, r0: np.ndarray, m: int, reorth: bool = True):
    """One augmented FOM cycle on the plain-operator Krylov space.

    Builds the Krylov basis from the unprojected residual, then solves the
    reduced j x j system whose left side couples the Hessenberg with the
    augmentation image and whose right side is the projected residual tested
    against the basis. Returns ``(y, z, dec, coupling)``.
    """
    if aug.k > 0 and aug.choice is not Constraint.GALERKIN:
        raise ValueError("rfom requires a Galerkin-constrained augmentation space")
    op = as_operator(a)
    dec = arnoldi(op, r0, m, reorth=reorth)
    j = dec.j
    if aug.k == 0:
        try:
            y = _fom_correction(dec, float(np.linalg.norm(r0)), j)
        except SingularMatrixError as exc:
            raise SolverBreakdownError(f"singular Hessenberg at size {j}", dec) from exc
        return y, np.zeros(0), dec, np.zeros((0, j))
    coupling = compute_coupling(aug, dec.v, dec.hbar)
    vj = dec.basis
    r_hat = r0 - aug.c @ aug.solve_small(aug.u.conj().T @ r0)
    lhs = dec.h - (vj.conj().T @ aug.c) @ coupling
    rhs = vj.conj().T @ r_hat
    try:
        y = dense_solve(lhs, rhs)
    except SingularMatrixError as exc:
        raise SolverBreakdownError(f"singular reduced system at size {j}", dec) from exc
    z = z_correction(aug, y, r0, coupling)
    return y, z, dec, coupling


def unproj_rgmres_cycle(a, aug: AugmentationSpace, r0: np.ndarray, m: int, reorth: bool = True):
    """One augmented GMRES cycle on the plain-operator Krylov space.

    Solves the normal-equations form of the residual minimization over the
    sum of the Krylov space and the augmentation space; requires orthonormal
    image columns. Returns ``(y, z, dec, coupling)``.
    """
    if aug.k > 0 and not (aug.choice is Constraint.MINRES and aug.c_orthonormal):
        raise ValueError(
            "rgmres requires a minimum-residual augmentation space with "
            "orthonormal image columns"
        )
    op = as_operator(a)
    dec = arnoldi(op, r0, m, reorth=reorth)
    j = dec.j
    if aug.k == 0:
        y = _gmres_correction(dec, float(np.linalg.norm(r0)), j)
        return y, np.zeros(0), dec, np.zeros((0, j))
    ncols = dec.v.shape[1]
    hb = dec.hbar[:ncols, :]
    d = dec.v.conj().T @ aug.c  # (j+1) x k of basis/image inner products
    hd = hb.conj().T @ d
    lhs = hb.conj().T @ hb - hd @ hd.conj().T
    rhs = hb.conj().T @ (dec.v.conj().T @ r0 - d @ (aug.c.conj().T @ r0))
    try:
        y = dense_solve(lhs, rhs)
    except SingularMatrixError as exc:
        raise SolverBreakdownError(
            f"singular reduced normal-equations system at size {j}", dec
        ) from exc
    coupling = compute_coupling(aug, dec.v, dec.hbar)
    z = z_correction(aug, y, r0, coupling)
    return y, z, dec, coupling


def _cycle(method, op, aug, r, m, reorth):
    if method == "rfom":
        return unproj_rfom_cycle(op, aug, r, m, reorth=reorth)
    return unproj_rgmres_cycle(op, aug, r, m, reorth=reorth)


def unproj_solve(
    a,
    b: np.ndarray,
    x0,
    u0,
    cfg: SolverConfig,
    method: str,
    recycler=None,
) -> AugmentedSolveResult:
    """Restarted unprojected augmented solve.

    ``u0`` seeds the augmentation space (``None`` or zero columns degenerates
    to the plain restarted method). After each cycle the iterate gains the
    Krylov correction and the augmentation correction, and the residual is
    updated in the same two stages (project, then subtract both images). An
    optional ``recycler(op, aug, dec)`` callback may replace the augmentation
    space between cycles; it returns the new space or ``None`` to keep it.
    """
    if method not in ("rfom", "rgmres"):
        raise ValueError(f"method must be 'rfom' or 'rgmres', got {method!r}")
    op = as_operator(a)
    b = check_finite("b", np.asarray(b))
    if b.shape != (op.dimension,):
        raise ValueError(f"rhs shape {b.shape} does not match dimension {op.dimension}")
    if x0 is None:
        x = np.zeros_like(b)
    else:
        x = check_finite("x0", np.asarray(x0)).copy()
    start_count = op.matvec_count

    choice = Constraint.GALERKIN if method == "rfom" else Constraint.MINRES
    if isinstance(u0, AugmentationSpace):
        aug = u0
    elif u0 is None or np.asarray(u0).shape[1] == 0:
        aug = AugmentationSpace.empty(op.dimension, choice)
    else:
        aug = build_augmentation(op, u0, choice, orthonormalize_c=(method == "rgmres"))

    if np.any(x):
        r = b - op(x)
    else:
        r = b.copy()
    rnorm = float(np.linalg.norm(r))
    threshold = cfg.threshold(float(np.linalg.norm(b)))
    history = [(0, 0, rnorm)]
    result = AugmentedSolveResult(
        x=x,
        residual_history=history,
        matvec_count=0,
        converged=rnorm <= threshold,
        cycles_used=0,
        k_used=aug.k,
        setup_matvecs=op.matvec_count - start_count,
    )
    if result.converged:
        result.matvec_count = op.matvec_count - start_count
        return result

    for cycle in range(1, cfg.max_cycles + 1):
        try:
            y, z, dec, coupling = _cycle(method, op, aug, r, cfg.cycle_length, cfg.reorth)
        except (SolverBreakdownError, RankDeficientError):
            result.stop_reason = "breakdown"
            break
        j = dec.j
        if aug.k > 0:
            vj = dec.basis
            ht = dec.hbar[: dec.v.shape[1], :]
            r_mid, proj_coeff = projected_residual(aug, r)
            x = x + vj @ y - aug.u @ (coupling @ y) + aug.u @ proj_coeff
            r = r_mid - dec.v @ (ht @ y) + aug.c @ (coupling @ y)
        else:
            for i, val in inner_residual_norms(dec, rnorm, "gmres" if method == "rgmres" else "fom"):
                history.append((cycle, i, val))
            x, r = _apply_cycle_update(x, r, dec, y, j)

        rnorm_new = float(np.linalg.norm(r))
        history.append((cycle, j, rnorm_new))
        result.x = x
        result.cycles_used = cycle
        result.z_norms.append(float(np.linalg.norm(z)))

        if cycle % DRIFT_CHECK_EVERY == 0:
            true_r = b - op(x)
            gap = float(np.linalg.norm(r - true_r) / max(np.linalg.norm(b), 1e-300))
            result.max_drift_gap = max(result.max_drift_gap, gap)
            if gap > DRIFT_WARN_RTOL:
                warnings.warn(
                    f"recurred residual drifted from true residual: "
                    f"relative gap {gap:.2e} at cycle {cycle}",
                    stacklevel=2,
                )
        result.cycle_matvecs.append(op.matvec_count - start_count)
        if rnorm_new <= threshold:
            result.converged = True
            result.stop_reason = "converged"
            result.final_decomposition = dec
            break
        if abs(rnorm - rnorm_new) < STAGNATION_RTOL * rnorm:
            result.stop_reason = "stagnation"
            result.final_decomposition = dec
            break
        rnorm = rnorm_new
        result.final_decomposition = dec

        if recycler is not None and cycle < cfg.max_cycles:
            new_aug = recycler(op, aug, dec)
            if new_aug is not None:
                aug = new_aug
                result.k_used = max(result.k_used, aug.k)
    else:
        result.stop_reason = "max_cycles"

    result.matvec_count = op.matvec_count - start_count
    return result
