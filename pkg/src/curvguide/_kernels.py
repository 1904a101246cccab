"""Hot loops: fixed-step RK4 through a curvature profile and Cayley line solves.

Every kernel works in natural units (sigma, 1/omega, hbar*omega). The
classical kernel is plain Python that numba compiles when enabled. The
Cayley solves have a separate vectorised numpy path, used when numba is
switched off (see ``_accel``).
"""
import numpy as np

from ._accel import USE_NUMBA, njit

# integrate_kernel status codes
OK = 0
METRIC = 1
REFLECTED = 2
TIMEOUT = 3
BUFFER_FULL = 4


@njit
def _kappa(x, c, ilo, ihi, region, s):
    """Curvature and its slope in ``region``.

    Regions are the stretches between breakpoints; ilo/ihi give the range of
    spline intervals belonging to each (ilo < 0 for the straight guides).
    The cubic of the nearest interval of the current region is extended past
    its ends, so a Runge-Kutta stage that overshoots a breakpoint still sees
    a smooth field.
    """
    lo = ilo[region]
    if lo < 0:
        return 0.0, 0.0
    k = np.searchsorted(x, s, side="right") - 1
    if k < lo:
        k = lo
    elif k > ihi[region]:
        k = ihi[region]
    t = s - x[k]
    kap = ((c[0, k] * t + c[1, k]) * t + c[2, k]) * t + c[3, k]
    dkap = (3.0 * c[0, k] * t + 2.0 * c[1, k]) * t + c[2, k]
    return kap, dkap


@njit
def _deriv(x, c, ilo, ihi, region, s, sd, y, yd):
    kap, dkap = _kappa(x, c, ilo, ihi, region, s)
    h = 1.0 - kap * y
    sdd = sd * (dkap * sd * y + 2.0 * kap * yd) / h
    ydd = -y - sd * sd * kap * h
    return sd, sdd, yd, ydd


@njit
def _rk4(x, c, ilo, ihi, region, s, sd, y, yd, dt):
    a0, a1, a2, a3 = _deriv(x, c, ilo, ihi, region, s, sd, y, yd)
    h2 = 0.5 * dt
    b0, b1, b2, b3 = _deriv(x, c, ilo, ihi, region, s + h2 * a0, sd + h2 * a1, y + h2 * a2, yd + h2 * a3)
    c0, c1, c2, c3 = _deriv(x, c, ilo, ihi, region, s + h2 * b0, sd + h2 * b1, y + h2 * b2, yd + h2 * b3)
    d0, d1, d2, d3 = _deriv(x, c, ilo, ihi, region, s + dt * c0, sd + dt * c1, y + dt * c2, yd + dt * c3)
    w = dt / 6.0
    return (
        s + w * (a0 + 2.0 * b0 + 2.0 * c0 + d0),
        sd + w * (a1 + 2.0 * b1 + 2.0 * c1 + d1),
        y + w * (a2 + 2.0 * b2 + 2.0 * c2 + d2),
        yd + w * (a3 + 2.0 * b3 + 2.0 * c3 + d3),
    )


@njit
def _energy(x, c, ilo, ihi, region, s, sd, y, yd):
    kap, _ = _kappa(x, c, ilo, ihi, region, s)
    vk = sd * (1.0 - kap * y)
    return yd * yd + y * y + vk * vk


@njit
def integrate_kernel(x, c, bp, ilo, ihi, region, t, s, sd, y, yd, dt, s_stop, t_max, out):
    """Integrate the curvilinear Newton equations with omega = 1.

    ``bp`` holds the sorted breakpoints (bend entrance, interior corners of
    kappa, bend exit); region r lies between bp[r-1] and bp[r]. Breakpoints
    are hit exactly by Newton iteration on the sub-step length, and a jump
    of kappa there is crossed with v_kappa = sdot*h held continuous.

    ``out`` has shape (rows, 6): t, s, sdot, y, ydot, energy (ydot^2 + y^2 +
    v_kappa^2). Returns (rows used, status, row where the last region was
    entered or -1).
    """
    rows = out.shape[0]
    nb = bp.shape[0]
    exit_row = -1
    status = OK
    out[0, 0] = t
    out[0, 1] = s
    out[0, 2] = sd
    out[0, 3] = y
    out[0, 4] = yd
    out[0, 5] = _energy(x, c, ilo, ihi, region, s, sd, y, yd)
    n = 1
    if region == nb:
        exit_row = 0
    while True:
        if s >= s_stop:
            break
        if t >= t_max:
            status = TIMEOUT
            break
        if n >= rows - 1:
            status = BUFFER_FULL
            break
        ns, nsd, ny, nyd = _rk4(x, c, ilo, ihi, region, s, sd, y, yd, dt)
        boundary = bp[region] if region < nb else np.inf
        if ns >= boundary:
            theta = (boundary - s) / (ns - s)
            for _ in range(8):
                ps, psd, py, pyd = _rk4(x, c, ilo, ihi, region, s, sd, y, yd, theta * dt)
                if psd <= 0.0:
                    break
                theta += (boundary - ps) / (psd * dt)
                if theta < 0.0:
                    theta = 0.0
                elif theta > 1.0:
                    theta = 1.0
            ps, psd, py, pyd = _rk4(x, c, ilo, ihi, region, s, sd, y, yd, theta * dt)
            kl, _ = _kappa(x, c, ilo, ihi, region, boundary)
            kr, _ = _kappa(x, c, ilo, ihi, region + 1, boundary)
            hl = 1.0 - kl * py
            hr = 1.0 - kr * py
            if hr <= 0.0:
                status = METRIC
                break
            t = t + theta * dt
            s = boundary
            sd = psd * hl / hr
            y = py
            yd = pyd
            region += 1
            if region == nb:
                exit_row = n
        else:
            t = t + dt
            s, sd, y, yd = ns, nsd, ny, nyd
        out[n, 0] = t
        out[n, 1] = s
        out[n, 2] = sd
        out[n, 3] = y
        out[n, 4] = yd
        out[n, 5] = _energy(x, c, ilo, ihi, region, s, sd, y, yd)
        n += 1
        kap, _ = _kappa(x, c, ilo, ihi, region, s)
        if 1.0 - kap * y <= 0.0:
            status = METRIC
            break
        if sd <= 0.0:
            status = REFLECTED
            break
    return n, status, exit_row


@njit
def _cayley_y_numba(phi, lo, di, up, half_dt, cbuf, rbuf):
    ns, ny = phi.shape
    z = 1j * half_dt
    for i in range(ns):
        for j in range(ny):
            acc = di[i, j] * phi[i, j]
            if j > 0:
                acc += lo[i, j] * phi[i, j - 1]
            if j < ny - 1:
                acc += up[i, j] * phi[i, j + 1]
            rbuf[j] = phi[i, j] - z * acc
        denom = 1.0 + z * di[i, 0]
        if abs(denom) < 1e-300:
            return i * ny
        cbuf[0] = z * up[i, 0] / denom
        rbuf[0] = rbuf[0] / denom
        for j in range(1, ny):
            a = z * lo[i, j]
            denom = 1.0 + z * di[i, j] - a * cbuf[j - 1]
            if abs(denom) < 1e-300:
                return i * ny + j
            cbuf[j] = z * up[i, j] / denom
            rbuf[j] = (rbuf[j] - a * rbuf[j - 1]) / denom
        phi[i, ny - 1] = rbuf[ny - 1]
        for j in range(ny - 2, -1, -1):
            rbuf[j] = rbuf[j] - cbuf[j] * rbuf[j + 1]
            phi[i, j] = rbuf[j]
    return -1


@njit
def _cayley_s_numba(phi, lo, di, up, half_dt, cbuf, rbuf):
    # cbuf, rbuf: (ns, ny) work arrays; sweeps run over i for all j at once
    ns, ny = phi.shape
    z = 1j * half_dt
    for i in range(ns):
        for j in range(ny):
            acc = di[i, j] * phi[i, j]
            if i > 0:
                acc += lo[i, j] * phi[i - 1, j]
            if i < ns - 1:
                acc += up[i, j] * phi[i + 1, j]
            rbuf[i, j] = phi[i, j] - z * acc
    for j in range(ny):
        denom = 1.0 + z * di[0, j]
        if abs(denom) < 1e-300:
            return j
        cbuf[0, j] = z * up[0, j] / denom
        rbuf[0, j] = rbuf[0, j] / denom
    for i in range(1, ns):
        for j in range(ny):
            a = z * lo[i, j]
            denom = 1.0 + z * di[i, j] - a * cbuf[i - 1, j]
            if abs(denom) < 1e-300:
                return i * ny + j
            cbuf[i, j] = z * up[i, j] / denom
            rbuf[i, j] = (rbuf[i, j] - a * rbuf[i - 1, j]) / denom
    for j in range(ny):
        phi[ns - 1, j] = rbuf[ns - 1, j]
    for i in range(ns - 2, -1, -1):
        for j in range(ny):
            rbuf[i, j] = rbuf[i, j] - cbuf[i, j] * rbuf[i + 1, j]
            phi[i, j] = rbuf[i, j]
    return -1


def _cayley_numpy(phi, lo, di, up, half_dt, axis):
    """Vectorised Thomas sweep: loop along ``axis``, vectorise over the other axis."""
    P, A, D, U = (arr if axis == 0 else arr.T for arr in (phi, lo, di, up))
    z = 1j * half_dt
    rhs = P - z * (D * P)
    rhs[1:] -= z * A[1:] * P[:-1]
    rhs[:-1] -= z * U[:-1] * P[1:]
    n = P.shape[0]
    cp = np.empty_like(rhs)
    denom = 1.0 + z * D[0]
    if np.any(np.abs(denom) < 1e-300):
        return 0
    cp[0] = z * U[0] / denom
    rhs[0] = rhs[0] / denom
    for i in range(1, n):
        a = z * A[i]
        denom = 1.0 + z * D[i] - a * cp[i - 1]
        if np.any(np.abs(denom) < 1e-300):
            return i
        cp[i] = z * U[i] / denom
        rhs[i] = (rhs[i] - a * rhs[i - 1]) / denom
    for i in range(n - 2, -1, -1):
        rhs[i] -= cp[i] * rhs[i + 1]
    P[...] = rhs
    return -1


class CayleySolver:
    """In-place Cayley factor ``(1 + i dt/2 A)^-1 (1 - i dt/2 A)`` along one axis.

    ``A`` is tridiagonal along ``axis`` with coefficient arrays shaped like
    the field. Work buffers are allocated once per solver.
    """

    def __init__(self, lo, di, up, axis, use_numba=None):
        self.lo = np.ascontiguousarray(lo, dtype=np.complex128)
        self.di = np.ascontiguousarray(di, dtype=np.complex128)
        self.up = np.ascontiguousarray(up, dtype=np.complex128)
        self.axis = axis
        self.use_numba = USE_NUMBA if use_numba is None else use_numba
        shape = self.di.shape
        if axis == 1:
            self._c = np.empty(shape[1], dtype=np.complex128)
            self._r = np.empty(shape[1], dtype=np.complex128)
        else:
            self._c = np.empty(shape, dtype=np.complex128)
            self._r = np.empty(shape, dtype=np.complex128)

    def __call__(self, phi, dt):
        """Advance ``phi`` by ``dt`` in place. Returns -1, or the flat index of a zero pivot."""
        if self.use_numba:
            kernel = _cayley_y_numba if self.axis == 1 else _cayley_s_numba
            return kernel(phi, self.lo, self.di, self.up, 0.5 * dt, self._c, self._r)
        return _cayley_numpy(phi, self.lo, self.di, self.up, 0.5 * dt, self.axis)


def apply_tridiagonal(phi, lo, di, up, axis):
    """``A phi`` for a tridiagonal ``A`` along ``axis``."""
    out = di * phi
    if axis == 0:
        out[1:] += lo[1:] * phi[:-1]
        out[:-1] += up[:-1] * phi[1:]
    else:
        out[:, 1:] += lo[:, 1:] * phi[:, :-1]
        out[:, :-1] += up[:, :-1] * phi[:, 1:]
    return out


@njit
def continuation_roots(F, y, v0sq, floor, out):
    """Follow the kappa=0 root of F + (v0^2 + k^2/4) k (1 - k y) = 0 along a time series.

    Each step starts from the previous root and may move by at most
    0.2|k_prev| + floor. Newton first; if it leaves the window or stalls,
    bisection on the window when it brackets a root.

    Returns -1 on success, otherwise the index where no root was found (the
    window there is centred on out[i-1]).
    """
    n = F.shape[0]
    out[0] = 0.0
    kp = 0.0
    for i in range(1, n):
        w = 0.2 * abs(kp) + floor
        lo = kp - w
        hi = kp + w
        k = kp
        ok = False
        for _ in range(50):
            a = v0sq + 0.25 * k * k
            h = 1.0 - k * y[i]
            f = F[i] + a * k * h
            df = (v0sq + 0.75 * k * k) * h - y[i] * a * k
            if df == 0.0:
                break
            step = f / df
            k -= step
            if k < lo or k > hi:
                break
            if abs(step) <= 1e-15 * (abs(k) + floor):
                ok = True
                break
        if not ok:
            flo = F[i] + (v0sq + 0.25 * lo * lo) * lo * (1.0 - lo * y[i])
            fhi = F[i] + (v0sq + 0.25 * hi * hi) * hi * (1.0 - hi * y[i])
            if flo * fhi > 0.0:
                return i
            a_, b_ = lo, hi
            fa = flo
            for _ in range(200):
                m = 0.5 * (a_ + b_)
                fm = F[i] + (v0sq + 0.25 * m * m) * m * (1.0 - m * y[i])
                if fm == 0.0 or (b_ - a_) < 1e-16 * (abs(m) + floor):
                    break
                if (fm < 0.0) == (fa < 0.0):
                    a_ = m
                    fa = fm
                else:
                    b_ = m
            k = 0.5 * (a_ + b_)
        out[i] = k
        kp = k
    return -1
