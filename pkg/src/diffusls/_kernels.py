"""Hot numeric loops, compiled with numba when available.

Two interchangeable backends are kept side by side:

* ``*_numba``: explicit loops under ``@njit``.
* ``*_numpy``: pure-numpy versions, used when numba is missing or when the
  environment sets ``DIFFUSLS_DISABLE_NUMBA=1``.

The public names ``rk4_lti`` and ``cosine_synthesis`` point at whichever
backend is active; ``BACKEND`` records the choice.
"""

import os
import threading

import numpy as np

try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
    # TBB in some images is too old and warns; the workqueue layer is always
    # present but must not be entered from two threads at once (see _PAR_LOCK)
    if not os.environ.get("NUMBA_THREADING_LAYER"):
        numba.config.THREADING_LAYER = "workqueue"
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator

    prange = range


def _numba_disabled():
    flag = os.environ.get("DIFFUSLS_DISABLE_NUMBA", "").strip().lower()
    return flag not in ("", "0", "false", "no")


USE_NUMBA = HAVE_NUMBA and not _numba_disabled()
BACKEND = "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# classical RK4 for x' = A x + B u(t)
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _rk4_lti_numba(A, B, x0, stage_u, h):
    n_steps = stage_u.shape[0]
    nx = A.shape[0]
    nu = B.shape[1]
    X = np.empty((n_steps + 1, nx))
    x = x0.copy()
    X[0] = x
    k1 = np.empty(nx)
    k2 = np.empty(nx)
    k3 = np.empty(nx)
    k4 = np.empty(nx)
    tmp = np.empty(nx)
    for n in range(n_steps):
        # stage 1
        for i in range(nx):
            acc = 0.0
            for j in range(nx):
                acc += A[i, j] * x[j]
            for j in range(nu):
                acc += B[i, j] * stage_u[n, 0, j]
            k1[i] = acc
        for i in range(nx):
            tmp[i] = x[i] + 0.5 * h * k1[i]
        # stage 2
        for i in range(nx):
            acc = 0.0
            for j in range(nx):
                acc += A[i, j] * tmp[j]
            for j in range(nu):
                acc += B[i, j] * stage_u[n, 1, j]
            k2[i] = acc
        for i in range(nx):
            tmp[i] = x[i] + 0.5 * h * k2[i]
        # stage 3
        for i in range(nx):
            acc = 0.0
            for j in range(nx):
                acc += A[i, j] * tmp[j]
            for j in range(nu):
                acc += B[i, j] * stage_u[n, 1, j]
            k3[i] = acc
        for i in range(nx):
            tmp[i] = x[i] + h * k3[i]
        # stage 4
        for i in range(nx):
            acc = 0.0
            for j in range(nx):
                acc += A[i, j] * tmp[j]
            for j in range(nu):
                acc += B[i, j] * stage_u[n, 2, j]
            k4[i] = acc
        for i in range(nx):
            x[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            X[n + 1, i] = x[i]
    return X


def _rk4_lti_numpy(A, B, x0, stage_u, h):
    # For an LTI right-hand side one RK4 step is the affine map
    # x -> M x + f_n, with M the degree-4 Taylor polynomial of e^{hA}.
    # The forcing f_n is the RK4 step applied to x = 0, vectorised over n.
    nx = A.shape[0]
    hA = h * A
    M = np.eye(nx)
    term = np.eye(nx)
    for k in range(1, 5):
        term = term @ hA / k
        M = M + term
    Bu0 = stage_u[:, 0, :] @ B.T
    Buh = stage_u[:, 1, :] @ B.T
    Bu1 = stage_u[:, 2, :] @ B.T
    k1 = Bu0
    k2 = (0.5 * h * k1) @ A.T + Buh
    k3 = (0.5 * h * k2) @ A.T + Buh
    k4 = (h * k3) @ A.T + Bu1
    forcing = h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    n_steps = stage_u.shape[0]
    X = np.empty((n_steps + 1, nx))
    X[0] = x0
    x = np.array(x0, dtype=float)
    for n in range(n_steps):
        x = M @ x + forcing[n]
        X[n + 1] = x
    return X


# ---------------------------------------------------------------------------
# even Fourier synthesis: f(theta) = c_0 + 2 sum_k c_k cos(k theta)
# ---------------------------------------------------------------------------

@njit(cache=True, parallel=True)
def _cosine_basis_numba(n_modes, theta):
    n_theta = theta.shape[0]
    basis = np.empty((n_modes, n_theta))
    for i in prange(n_theta):
        c = np.cos(theta[i])
        s = np.sin(theta[i])
        # cos(k theta) by the angle-addition recurrence
        ck = 1.0
        sk = 0.0
        basis[0, i] = 1.0
        for k in range(1, n_modes):
            ck, sk = ck * c - sk * s, sk * c + ck * s
            basis[k, i] = 2.0 * ck
    return basis


@njit(cache=True)
def _cosine_synthesis_numba(coeffs, theta):
    basis = _cosine_basis_numba(coeffs.shape[1], theta)
    return np.dot(coeffs, basis)


def _cosine_synthesis_numpy(coeffs, theta):
    n_modes = coeffs.shape[1]
    weights = np.full(n_modes, 2.0)
    weights[0] = 1.0
    basis = np.cos(np.outer(np.arange(n_modes), theta))
    return (coeffs * weights) @ basis


_PAR_LOCK = threading.Lock()

if USE_NUMBA:
    _rk4_impl = _rk4_lti_numba
    _cos_impl = _cosine_synthesis_numba
else:
    _rk4_impl = _rk4_lti_numpy
    _cos_impl = _cosine_synthesis_numpy


def rk4_lti(A, B, x0, stage_u, h):
    """Integrate ``x' = A x + B u`` with the classical fourth-order method.

    Parameters
    ----------
    A : (nx, nx) array
    B : (nx, nu) array
    x0 : (nx,) array
    stage_u : (n_steps, 3, nu) array
        Input values at the start, midpoint and end of every step.
    h : float
        Fixed step size.

    Returns
    -------
    X : (n_steps + 1, nx) array
        State at every grid point, ``X[0] == x0``.
    """
    A = np.ascontiguousarray(A, dtype=float)
    B = np.ascontiguousarray(B, dtype=float)
    x0 = np.ascontiguousarray(x0, dtype=float)
    stage_u = np.ascontiguousarray(stage_u, dtype=float)
    return _rk4_impl(A, B, x0, stage_u, float(h))


def cosine_synthesis(coeffs, theta):
    """Evaluate ``c_0 + 2 sum_{k>=1} c_k cos(k theta)`` row by row.

    ``coeffs`` has shape (rows, kmax + 1); the result has shape
    (rows, len(theta)).
    """
    coeffs = np.ascontiguousarray(np.atleast_2d(coeffs), dtype=float)
    theta = np.ascontiguousarray(theta, dtype=float)
    with _PAR_LOCK:
        return _cos_impl(coeffs, theta)
