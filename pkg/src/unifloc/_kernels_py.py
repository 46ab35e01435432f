"""Pure-numpy reference implementations of the hot kernels.

Signatures mirror the compiled ``_kernels`` extension exactly; the two are
checked against each other in the test-suite.
"""
import numpy as np


def max_phase_errors(y, z, wavelength, R, theta, phi):
    """Maximum plane-wave phase error over all elements, per point.

    ``y``, ``z`` are element coordinates of shape ``(N,)``; ``R``, ``theta``,
    ``phi`` are 1-D arrays of shape ``(P,)``. Returns shape ``(P,)``.
    """
    R = np.asarray(R, dtype=float)[:, None]
    theta = np.asarray(theta, dtype=float)[:, None]
    phi = np.asarray(phi, dtype=float)[:, None]
    st = np.sin(theta)
    a = y * (st * np.sin(phi)) + z * np.cos(theta)
    x = R * st * np.cos(phi)
    d = np.sqrt(x * x + (R * st * np.sin(phi) - y) ** 2 + (R * np.cos(theta) - z) ** 2)
    lin = R - a
    # d - lin == (y^2 + z^2 - a^2) / (d + lin); avoids cancellation at large R
    with np.errstate(divide="ignore", invalid="ignore"):
        stable = (y * y + z * z - a * a) / (d + lin)
    err = np.where(lin > 0, stable, d - lin)
    return (2 * np.pi / wavelength) * err.max(axis=1)


def column_losses(AT, g, n_near):
    """Localization loss of every dictionary column.

    ``AT`` is the predicted-signal matrix transposed, shape ``(C, k)``.
    Columns ``< n_near`` use the direct residual; the rest are first scaled
    by their least-squares amplitude. Zero far-field columns get ``inf``.
    """
    AT = np.asarray(AT, dtype=complex)
    g = np.asarray(g, dtype=complex)
    losses = np.empty(AT.shape[0])
    near = AT[:n_near]
    losses[:n_near] = np.sqrt(np.sum(np.abs(g - near) ** 2, axis=1))
    far = AT[n_near:]
    nrm = np.sum(far.real**2 + far.imag**2, axis=1)
    dot = far.conj() @ g
    with np.errstate(divide="ignore", invalid="ignore"):
        amp = dot / nrm
        res = np.sqrt(np.sum(np.abs(g - amp[:, None] * far) ** 2, axis=1))
    res[nrm == 0] = np.inf
    losses[n_near:] = res
    return losses


def _ridged_inverse(ds, J_hist, beta, ridge, scale):
    m = ds @ beta
    J = J_hist + scale * np.outer(m.conj(), m).real
    J = 0.5 * (J + J.T) + ridge * np.eye(len(J))
    try:
        Jinv = np.linalg.inv(J)
    except np.linalg.LinAlgError:
        return m, None, np.inf
    cond = np.abs(J).sum(axis=0).max() * np.abs(Jinv).sum(axis=0).max()
    return m, Jinv, cond


def crb_objective(ds, J_hist, beta, weights, ridge, scale):
    """Weighted CRB after adding candidate ``beta``; returns ``(value, cond_1)``.

    ``ds`` holds the symbol-scaled channel partials ``(P, N)``, ``J_hist`` the
    Fisher matrix of earlier cycles and ``scale`` is ``2 / sigma^2``.
    """
    _, Jinv, cond = _ridged_inverse(ds, J_hist, beta, ridge, scale)
    if Jinv is None:
        return np.inf, cond
    return float(np.asarray(weights) @ np.diag(Jinv)), cond


def crb_gradient(ds, J_hist, beta, weights, ridge, scale):
    """Euclidean gradient ``2 df/d(beta*)`` of :func:`crb_objective` and ``cond_1``."""
    m, Jinv, cond = _ridged_inverse(ds, J_hist, beta, ridge, scale)
    if Jinv is None:
        return np.full(len(beta), np.nan + 0j), cond
    M = Jinv @ np.diag(weights) @ Jinv
    return -2.0 * scale * (ds.conj().T @ (M @ m)), cond


def riemannian_descent(ds, J_hist, beta0, weights, ridge, scale, cond_cap, f0, tol,
                       max_iterations, initial_step, backtrack, armijo, max_backtracks):
    """Armijo-backtracked Riemannian gradient descent on the circle manifold.

    Returns ``(beta, f, objectives, iterations, status, cond)``. Status codes:
    0 objective change below ``tol``, 1 iteration limit, 2 no Armijo step,
    3 zero tangent gradient, 4 singular Fisher matrix, 5 non-finite gradient.
    """
    if ds.shape[0] not in (2, 3):
        raise ValueError("only 2 or 3 parameters are supported")
    beta = np.array(beta0, dtype=complex)
    f = f0
    objectives = [f0]
    status, iterations, cond = 1, 0, 0.0
    for it in range(1, max_iterations + 1):
        iterations = it
        grad, cond = crb_gradient(ds, J_hist, beta, weights, ridge, scale)
        if not cond <= cond_cap:
            status = 4
            break
        rgrad = grad - (grad.conj() * beta).real * beta
        peak = np.max(np.abs(rgrad))
        if peak == 0:
            status = 3
            break
        if not np.isfinite(peak):
            status = 5
            break
        slope = -float(np.vdot(rgrad, rgrad).real)
        step = initial_step / peak
        for _ in range(max_backtracks):
            t = beta - step * rgrad
            trial = t / np.abs(t)
            f_trial, cond = crb_objective(ds, J_hist, trial, weights, ridge, scale)
            if not cond <= cond_cap:
                f_trial = np.inf
            if np.isfinite(f_trial) and f_trial <= f + armijo * step * slope:
                break
            step *= backtrack
        else:
            status = 2
            break
        beta = trial
        objectives.append(f_trial)
        change, f = f - f_trial, f_trial
        if change < tol:
            status = 0
            break
    return beta, f, np.array(objectives), iterations, status, cond
