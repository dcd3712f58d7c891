# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled path kernels.

Mirrors ``_kernels_py`` exactly: same RNG layout, same event rules. Every
function fills caller-owned output arrays for a contiguous block of path
indices and releases the GIL while doing so.
"""

from libc.math cimport log, exp, fabs, NAN
from libc.stdint cimport uint64_t, int64_t

cdef uint64_t GAMMA = 0x9E3779B97F4A7C15ULL
cdef uint64_t MIX1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t MIX2 = 0x94D049BB133111EBULL
cdef uint64_t ROOT_KEY = 0x243F6A8885A308D3ULL
cdef double INV53 = 1.0 / 9007199254740992.0
cdef double BRIDGE_CUTOFF = 40.0


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    return z ^ (z >> 31)


cdef inline uint64_t derive(uint64_t key, uint64_t x) noexcept nogil:
    return mix64(key ^ mix64((x + 1) * GAMMA))


cdef inline double unif(uint64_t w) noexcept nogil:
    return (<double>(w >> 11) + 0.5) * INV53


cdef inline uint64_t path_key(uint64_t seed, uint64_t idx) noexcept nogil:
    cdef uint64_t k = derive(ROOT_KEY, seed)
    k = derive(k, 1)
    return derive(k, idx)


cdef inline uint64_t inner_key(uint64_t seed, uint64_t idx, uint64_t n, uint64_t j) noexcept nogil:
    cdef uint64_t k = derive(ROOT_KEY, seed)
    k = derive(k, 2)
    k = derive(k, idx)
    k = derive(k, n)
    return derive(k, j)


cdef uint64_t RETRY_BASE = 0x8000000000000000ULL
cdef double ZR
cdef double ZX[129]
cdef double ZRATIO[128]


def _load_tables():
    global ZR
    from .rng import ZIG_X, ZIG_RATIO, ZIG_R
    cdef int i
    ZR = ZIG_R
    for i in range(129):
        ZX[i] = ZIG_X[i]
    for i in range(128):
        ZRATIO[i] = ZIG_RATIO[i]


_load_tables()


cdef struct Stream:
    uint64_t key


cdef inline uint64_t retry(int64_t k, int64_t j) noexcept nogil:
    return RETRY_BASE + (<uint64_t>(k - 1) << 8) + <uint64_t>(j & 0xFF)


cdef double normal_slow(uint64_t key, int64_t k, uint64_t w) noexcept nogil:
    cdef int64_t j = 0
    cdef double u, x, f0, f1, a, b, v
    cdef int i
    while True:
        u = 2.0 * unif(w) - 1.0
        i = <int>(w & 0x7F)
        if fabs(u) < ZRATIO[i]:
            return u * ZX[i]
        if i == 0:
            while True:
                a = log(unif(derive(key, retry(k, j)))) / ZR
                b = log(unif(derive(key, retry(k, j + 1))))
                j += 2
                if -2.0 * b >= a * a:
                    break
            if u < 0.0:
                return a - ZR
            return ZR - a
        x = u * ZX[i]
        f0 = exp(-0.5 * (ZX[i] * ZX[i] - x * x))
        f1 = exp(-0.5 * (ZX[i + 1] * ZX[i + 1] - x * x))
        v = unif(derive(key, retry(k, j)))
        j += 1
        if f1 + v * (f0 - f1) < 1.0:
            return x
        w = derive(key, retry(k, j))
        j += 1


cdef inline double normal(Stream* s, int64_t k) noexcept nogil:
    cdef uint64_t w = derive(s.key, <uint64_t>(2 * (k - 1)))
    cdef double u = 2.0 * unif(w) - 1.0
    cdef int i = <int>(w & 0x7F)
    if fabs(u) < ZRATIO[i]:
        return u * ZX[i]
    return normal_slow(s.key, k, w)


cdef inline double bridge_u(Stream* s, int64_t k) noexcept nogil:
    return unif(derive(s.key, <uint64_t>(2 * (k - 1) + 1)))


cdef inline double one_side(double x, double y, double b, double s_dt) noexcept nogil:
    cdef double a = 2.0 * (x - b) * (y - b) / s_dt
    if a < BRIDGE_CUTOFF:
        return exp(-a)
    return 0.0


cdef inline double crossing(double x, double y, double lo, double hi, double s_dt) noexcept nogil:
    cdef double plo = one_side(x, y, lo, s_dt)
    cdef double phi = one_side(x, y, hi, s_dt)
    return plo + phi - plo * phi


cdef inline bint inside(double y, double lo, double hi) noexcept nogil:
    return y > lo and y < hi


cdef inline bint member(double y, double lo, double hi, bint closed) noexcept nogil:
    if closed:
        return y >= lo and y <= hi
    return y > lo and y < hi


cdef inline int step_events(Stream* s, int64_t k, double x, double y,
                            double ulo, double uhi, bint track_u,
                            double klo, double khi, bint killing,
                            bint bridge, double s_dt) noexcept nogil:
    """Bit 1: killed in step k. Bit 2: left U in step k (implied by killing)."""
    cdef int ev = 0
    cdef double pk = 0.0, pu = 0.0, u = 2.0
    cdef bint need_u = False
    if killing:
        if not inside(y, klo, khi):
            ev = 3
        elif bridge:
            pk = crossing(x, y, klo, khi, s_dt)
            if pk > 0.0:
                u = bridge_u(s, k)
                need_u = True
                if u < pk:
                    ev = 3
    if track_u and ev == 0:
        if not inside(y, ulo, uhi):
            ev |= 2
        elif bridge:
            pu = crossing(x, y, ulo, uhi, s_dt)
            if pu > 0.0:
                if not need_u:
                    u = bridge_u(s, k)
                if u < pu:
                    ev |= 2
    return ev


def simulate_batch(double x0, double sd, int64_t n_steps, uint64_t seed,
                   int64_t start, double klo, double khi, bint killing,
                   bint bridge, double s_dt,
                   double[:, ::1] out, int64_t[::1] kill_steps):
    """Lifted Brownian paths; states after the kill step are NaN."""
    cdef Py_ssize_t count = out.shape[0]
    cdef Py_ssize_t i
    cdef int64_t k, j
    cdef double x, y
    cdef Stream s
    with nogil:
        for i in range(count):
            s.key = path_key(seed, <uint64_t>(start + i))
            x = x0
            out[i, 0] = x0
            kill_steps[i] = -1
            if killing and not inside(x0, klo, khi):
                kill_steps[i] = 0
                for j in range(n_steps + 1):
                    out[i, j] = NAN
                continue
            for k in range(1, n_steps + 1):
                y = x + sd * normal(&s, k)
                if killing and step_events(&s, k, x, y, 0.0, 0.0, False,
                                           klo, khi, True, bridge, s_dt) & 1:
                    kill_steps[i] = k
                    for j in range(k, n_steps + 1):
                        out[i, j] = NAN
                    break
                out[i, k] = y
                x = y


def exit_batch(double x0, double sd, int64_t n_steps, uint64_t seed, int64_t start,
               double ulo, double uhi, double klo, double khi, bint killing,
               bint bridge, double s_dt, int64_t[::1] sample_idx, bint full,
               double[:, ::1] out_samples, int64_t[::1] out_exit, int64_t[::1] out_kill):
    """First exit step of U and states at ``sample_idx``.

    With ``full`` false the path stops at the exit of U and later samples are
    NaN; otherwise it runs to ``n_steps`` (NaN only after killing).
    """
    cdef Py_ssize_t count = out_samples.shape[0]
    cdef Py_ssize_t ns = sample_idx.shape[0]
    cdef Py_ssize_t i, q
    cdef int64_t k
    cdef int ev
    cdef double x, y
    cdef bint exited, dead
    cdef Stream s
    with nogil:
        for i in range(count):
            s.key = path_key(seed, <uint64_t>(start + i))
            x = x0
            out_exit[i] = -1
            out_kill[i] = -1
            for q in range(ns):
                out_samples[i, q] = NAN
            exited = False
            dead = False
            if killing and not inside(x0, klo, khi):
                out_kill[i] = 0
                out_exit[i] = 0
                continue
            if not inside(x0, ulo, uhi):
                out_exit[i] = 0
                exited = True
            q = 0
            while q < ns and sample_idx[q] == 0:
                if full or not exited:
                    out_samples[i, q] = x0
                q += 1
            if exited and not full:
                continue
            for k in range(1, n_steps + 1):
                y = x + sd * normal(&s, k)
                ev = step_events(&s, k, x, y, ulo, uhi, not exited,
                                 klo, khi, killing, bridge, s_dt)
                if ev & 1:
                    out_kill[i] = k
                    if not exited:
                        out_exit[i] = k
                    break
                if ev & 2:
                    exited = True
                    out_exit[i] = k
                    if not full:
                        break
                while q < ns and sample_idx[q] == k:
                    out_samples[i, q] = y
                    q += 1
                x = y
                if q >= ns and exited:
                    break


cdef void run_inner(uint64_t seed, int64_t idx, int64_t n, int64_t m, double x_start,
                    int64_t sigma, double sd, double ulo, double uhi, bint track_u,
                    double klo, double khi, bint killing, bint bridge, double s_dt,
                    double alo, double ahi, bint a_closed, int64_t[::1] targets,
                    double* acc) noexcept nogil:
    """Sum over m restarts of 1{alive, X in A} at each target (rel. step target - sigma)."""
    cdef Py_ssize_t nt = targets.shape[0]
    cdef Py_ssize_t q, q0
    cdef int64_t j, k, last, rel
    cdef double x, y
    cdef int ev
    cdef Stream s
    q0 = 0
    while q0 < nt and targets[q0] < sigma:
        q0 += 1
    if q0 >= nt:
        return
    last = targets[nt - 1] - sigma
    for j in range(m):
        s.key = inner_key(seed, <uint64_t>idx, <uint64_t>n, <uint64_t>j)
        x = x_start
        q = q0
        while q < nt and targets[q] - sigma == 0:
            if member(x, alo, ahi, a_closed):
                acc[q] += 1.0
            q += 1
        for k in range(1, last + 1):
            y = x + sd * normal(&s, k)
            ev = step_events(&s, k, x, y, ulo, uhi, track_u,
                             klo, khi, killing, bridge, s_dt)
            if ev != 0:
                break
            while q < nt and targets[q] - sigma == k:
                if member(y, alo, ahi, a_closed):
                    acc[q] += 1.0
                q += 1
            x = y


def mdh_batch(double x0, double sd, uint64_t seed, int64_t start,
              double ulo, double uhi, double blo, double bhi, bint b_closed,
              double alo, double ahi, bint a_closed,
              double klo, double khi, bint killing, bint bridge, double s_dt,
              int64_t[::1] targets, int64_t n_max, int64_t m_inner, bint single,
              double[:, ::1] out_lhs, double[:, ::1] out_part,
              double[:, :, ::1] out_terms, int64_t[:, ::1] out_tau,
              int64_t[:, ::1] out_sigma, double[:, ::1] out_xsigma):
    """Outer paths with the alternating exit/entrance sequence and nested restarts.

    ``out_terms[i, n, q]`` is the inner-average estimate of
    ``1{sigma_n <= t_q} P^U_{t_q - sigma_n} u(X_{sigma_n})`` for path i.
    In ``single`` mode only the first exit is used and restarts run the
    unkilled (by U) process from ``X_{tau_U}``.
    """
    cdef Py_ssize_t count = out_lhs.shape[0]
    cdef Py_ssize_t nt = targets.shape[0]
    cdef Py_ssize_t i, q, nn
    cdef int64_t k, n_steps, nsig
    cdef int phase, ev
    cdef double x, y
    cdef bint alive_u, dead
    cdef Stream s
    cdef double acc[64]
    n_steps = targets[nt - 1]
    with nogil:
        for i in range(count):
            for q in range(nt):
                out_lhs[i, q] = 0.0
                out_part[i, q] = 0.0
                for nn in range(n_max):
                    out_terms[i, nn, q] = 0.0
            for nn in range(n_max):
                out_tau[i, nn] = -1
                out_sigma[i, nn] = -1
                out_xsigma[i, nn] = NAN
            s.key = path_key(seed, <uint64_t>(start + i))
            x = x0
            nsig = 0
            dead = killing and not inside(x0, klo, khi)
            if dead:
                continue
            # phase 0: inside U waiting for exit; phase 1: waiting for entrance into B
            alive_u = inside(x0, ulo, uhi)
            phase = 0
            if not alive_u:
                phase = 1
                out_tau[i, 0] = 0
                if single:
                    phase = 2
            q = 0
            while q < nt and targets[q] == 0:
                if member(x0, alo, ahi, a_closed):
                    out_lhs[i, q] = 1.0
                    if alive_u:
                        out_part[i, q] = 1.0
                q += 1
            if phase == 1 and member(x0, blo, bhi, b_closed):
                out_sigma[i, 0] = 0
                out_xsigma[i, 0] = x0
                nsig = 1
                phase = 0
            for k in range(1, n_steps + 1):
                y = x + sd * normal(&s, k)
                ev = step_events(&s, k, x, y, ulo, uhi, phase == 0,
                                 klo, khi, killing, bridge, s_dt)
                if ev & 1:
                    if phase == 0 and nsig < n_max and not (single and nsig > 0):
                        out_tau[i, nsig] = k
                    break
                if phase == 0 and (ev & 2):
                    alive_u = False
                    if nsig < n_max:
                        out_tau[i, nsig] = k
                    phase = 2 if single else 1
                    if single:
                        out_sigma[i, 0] = k
                        out_xsigma[i, 0] = y
                        nsig = 1
                if phase == 1 and member(y, blo, bhi, b_closed):
                    if nsig < n_max:
                        out_sigma[i, nsig] = k
                        out_xsigma[i, nsig] = y
                    nsig += 1
                    phase = 0
                while q < nt and targets[q] == k:
                    if member(y, alo, ahi, a_closed):
                        out_lhs[i, q] = 1.0
                        if alive_u:
                            out_part[i, q] = 1.0
                    q += 1
                x = y
            if single:
                nsig = 1 if out_sigma[i, 0] >= 0 else 0
                if out_tau[i, 0] == 0:
                    out_sigma[i, 0] = 0
                    out_xsigma[i, 0] = x0
                    nsig = 1
            for nn in range(n_max):
                if out_sigma[i, nn] < 0 or m_inner <= 0:
                    break
                for q in range(nt):
                    acc[q] = 0.0
                run_inner(seed, start + i, nn, m_inner, out_xsigma[i, nn],
                          out_sigma[i, nn], sd, ulo, uhi, not single,
                          klo, khi, killing, bridge, s_dt, alo, ahi, a_closed,
                          targets, acc)
                for q in range(nt):
                    out_terms[i, nn, q] = acc[q] / m_inner


def walk_batch(int64_t v0, int64_t n_steps, uint64_t seed, int64_t start,
               int64_t[:, ::1] nbrs, int64_t[::1] deg, int64_t[:, ::1] out):
    """Nearest-neighbour walk on a graph given as a padded neighbour table."""
    cdef Py_ssize_t count = out.shape[0]
    cdef Py_ssize_t i
    cdef int64_t k, v, c
    cdef uint64_t key
    with nogil:
        for i in range(count):
            key = path_key(seed, <uint64_t>(start + i))
            v = v0
            out[i, 0] = v
            for k in range(1, n_steps + 1):
                c = <int64_t>(unif(derive(key, <uint64_t>(k - 1))) * deg[v])
                v = nbrs[v, c]
                out[i, k] = v
