"""Closed-form geometry of the Poincare ball, the half-plane and their products.

All functions are vectorised: a ball point is an array whose last axis holds
the coordinates, so ``(..., k)`` arrays are processed element-wise over the
leading axes. Product points have shape ``(..., p, k)``. Half-plane points are
``(..., 2)`` arrays holding ``(a, y)`` with ``y > 0``.

Every point-producing operation re-projects its result to norm
``<= 1 - EPS_BALL``.
"""

import numpy as np

EPS_BALL = 1e-5
ARTANH_MAX = 1.0 - 1e-12


def _sqnorm(x):
    return np.sum(x * x, axis=-1)


def _dot(x, y):
    return np.sum(x * y, axis=-1)


def _check_same_shape(x, y):
    if x.shape[-1] != y.shape[-1]:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")


def _artanh(x):
    return np.arctanh(np.minimum(x, ARTANH_MAX))


def _arccosh1p(z):
    """arccosh(1 + z) for z >= 0, accurate for small z."""
    z = np.maximum(z, 0.0)
    return np.log1p(z + np.sqrt(z * (z + 2.0)))


def project_to_ball(x, eps=EPS_BALL):
    """Rescale rows whose norm exceeds ``1 - eps`` back onto that radius."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite coordinates cannot be projected into the ball")
    norm = np.sqrt(_sqnorm(x))[..., None]
    limit = 1.0 - eps
    scale = np.where(norm > limit, limit / np.where(norm > 0, norm, 1.0), 1.0)
    return x * scale


def conformal_factor(x):
    """lambda_x = 2 / (1 - |x|^2)."""
    x = np.asarray(x, dtype=np.float64)
    return 2.0 / (1.0 - _sqnorm(x))


def ball_distance(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_same_shape(x, y)
    diff = _sqnorm(x - y)
    denom = (1.0 - _sqnorm(x)) * (1.0 - _sqnorm(y))
    return _arccosh1p(2.0 * diff / denom)


def halfplane_distance(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[-1] != 2 or y.shape[-1] != 2:
        raise ValueError("half-plane points must have 2 coordinates")
    diff = _sqnorm(x - y)
    return _arccosh1p(diff / (2.0 * x[..., 1] * y[..., 1]))


def product_distance(x, y):
    """Distance in (D^k)^p: root of the summed squared factor distances."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim < 2 or y.ndim < 2 or x.shape[-2:] != y.shape[-2:]:
        raise ValueError(f"product shape mismatch: {x.shape} vs {y.shape}")
    d = ball_distance(x, y)
    return np.sqrt(np.sum(d * d, axis=-1))


def _mobius_add_raw(x, y):
    xy = _dot(x, y)[..., None]
    xx = _sqnorm(x)[..., None]
    yy = _sqnorm(y)[..., None]
    num = (1.0 + 2.0 * xy + yy) * x + (1.0 - xx) * y
    den = 1.0 + 2.0 * xy + xx * yy
    return num / den


def mobius_add(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_same_shape(x, y)
    return project_to_ball(_mobius_add_raw(x, y))


def mobius_neg(x):
    return -np.asarray(x, dtype=np.float64)


def _mobius_scalar_raw(r, x):
    r = np.asarray(r, dtype=np.float64)
    norm = np.sqrt(_sqnorm(x))
    safe = np.where(norm > 0, norm, 1.0)
    scale = np.where(norm > 0, np.tanh(r * _artanh(norm)) / safe, 0.0)
    return scale[..., None] * x


def mobius_scalar(r, x):
    """r (x) x, with r (x) 0 = 0 for every r."""
    x = np.asarray(x, dtype=np.float64)
    return project_to_ball(_mobius_scalar_raw(r, x))


def exp_map(x, v):
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _check_same_shape(x, v)
    vnorm = np.sqrt(_sqnorm(v))
    lam = conformal_factor(x)
    safe = np.where(vnorm > 0, vnorm, 1.0)
    step = (np.where(vnorm > 0, np.tanh(0.5 * lam * vnorm) / safe, 0.0))[..., None] * v
    return project_to_ball(_mobius_add_raw(x, step))


def log_map(x, y):
    """Inverse of :func:`exp_map`; returns the zero vector when ``y == x``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_same_shape(x, y)
    z = _mobius_add_raw(-x, y)
    z = np.where(np.all(x == y, axis=-1)[..., None], 0.0, z)
    znorm = np.sqrt(_sqnorm(z))
    lam = conformal_factor(x)
    safe = np.where(znorm > 0, znorm, 1.0)
    scale = np.where(znorm > 0, (2.0 / lam) * _artanh(znorm) / safe, 0.0)
    return scale[..., None] * z


def gyration(u, v, w):
    """gyr[u, v] w via the closed form w + 2 (A u + B v) / D."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    uw = _dot(u, w)
    vw = _dot(v, w)
    uv = _dot(u, v)
    uu = _sqnorm(u)
    vv = _sqnorm(v)
    a = -uw * vv + vw + 2.0 * uv * vw
    b = -vw * uu - uw
    d = 1.0 + 2.0 * uv + uu * vv
    return w + 2.0 * (a[..., None] * u + b[..., None] * v) / d[..., None]


def parallel_transport(x, y, v):
    """Transport tangent vector ``v`` at ``x`` along the geodesic to ``y``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    ratio = conformal_factor(x) / conformal_factor(y)
    return ratio[..., None] * gyration(y, -x, v)


def geodesic_point(a, b, t):
    """Point at fraction ``t`` of the geodesic from ``a`` to ``b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_shape(a, b)
    t = np.asarray(t, dtype=np.float64)
    direction = _mobius_add_raw(-a, b)
    return project_to_ball(_mobius_add_raw(a, _mobius_scalar_raw(t, direction)))


def disk_to_halfplane(x):
    """Isometry D^2 -> H^2 sending the origin to (0, 1) and (0, 1) to infinity."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != 2:
        raise ValueError("disk_to_halfplane needs 2D points")
    if np.any(1.0 - x[..., 1] < EPS_BALL):
        raise ValueError("point too close to (0, 1); half-plane image out of numeric range")
    return _halfplane_coords(x)


def _halfplane_coords(x):
    x1 = x[..., 0]
    x2 = x[..., 1]
    den = (1.0 - x2) ** 2 + x1 * x1
    a = 2.0 * x1 / den
    y = (1.0 - x1 * x1 - x2 * x2) / den
    return np.stack([a, y], axis=-1)


def halfplane_to_disk(z):
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != 2:
        raise ValueError("half-plane points have 2 coordinates")
    a = z[..., 0]
    y = z[..., 1]
    if np.any(y <= 0):
        raise ValueError("half-plane points need y > 0")
    den = a * a + (y + 1.0) ** 2
    x1 = 2.0 * a / den
    x2 = (a * a + y * y - 1.0) / den
    return np.stack([x1, x2], axis=-1)


def rotation_to_vertical(u):
    """Matrix R with R u = (0, 1); ``u`` is normalised if within 1e-6 of unit."""
    u = np.asarray(u, dtype=np.float64)
    norm = np.sqrt(_sqnorm(u))
    if np.any(np.abs(norm - 1.0) > 1e-6):
        raise ValueError("rotation direction must be a unit vector")
    u = u / norm[..., None]
    u1 = u[..., 0]
    u2 = u[..., 1]
    return np.stack([np.stack([u2, -u1], axis=-1), np.stack([u1, u2], axis=-1)], axis=-2)


def rotate_about_origin(u, x):
    x = np.asarray(x, dtype=np.float64)
    rot = rotation_to_vertical(u)
    return np.einsum("...ij,...j->...i", rot, x)
