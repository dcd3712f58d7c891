"""Pure-numpy path kernels.

Same signatures, RNG layout and event rules as the compiled ``_kernels``
module. Paths are advanced together one time step at a time.
"""

from __future__ import annotations

import numpy as np

from . import rng

BRIDGE_CUTOFF = 40.0


def _one_side(x, y, b, s_dt):
    with np.errstate(invalid="ignore", over="ignore"):
        a = 2.0 * (x - b) * (y - b) / s_dt
    out = np.zeros_like(x)
    m = a < BRIDGE_CUTOFF
    out[m] = np.exp(-a[m])
    return out


def _crossing(x, y, lo, hi, s_dt):
    plo = _one_side(x, y, lo, s_dt)
    phi = _one_side(x, y, hi, s_dt)
    return plo + phi - plo * phi


def _inside(y, lo, hi):
    return (y > lo) & (y < hi)


def _member(y, lo, hi, closed):
    if closed:
        return (y >= lo) & (y <= hi)
    return (y > lo) & (y < hi)


def _step_events(keys, k, x, y, ulo, uhi, track_u, klo, khi, killing, bridge, s_dt):
    """Bit 1: killed in step k. Bit 2: left U in step k (implied by killing)."""
    ev = np.zeros(x.shape, dtype=np.int64)
    u = rng.bridge_uniforms(keys, np.full(x.shape, k)) if bridge else None
    if killing:
        dead = ~_inside(y, klo, khi)
        if bridge:
            pk = _crossing(x, y, klo, khi, s_dt)
            dead |= (pk > 0.0) & (u < pk)
        ev[dead] = 3
    track = np.asarray(track_u, dtype=bool) & (ev == 0)
    if track.any():
        out = ~_inside(y, ulo, uhi)
        if bridge:
            pu = _crossing(x, y, ulo, uhi, s_dt)
            out |= (pu > 0.0) & (u < pu)
        ev[track & out] |= 2
    return ev


def _keys(seed, start, count):
    return rng.path_keys(seed, start, count)


def simulate_batch(x0, sd, n_steps, seed, start, klo, khi, killing, bridge, s_dt,
                   out, kill_steps):
    count = out.shape[0]
    keys = _keys(seed, start, count)
    x = np.full(count, float(x0))
    out[:, 0] = x0
    kill_steps[:] = -1
    alive = np.ones(count, dtype=bool)
    if killing and not (klo < x0 < khi):
        out[:, :] = np.nan
        kill_steps[:] = 0
        return
    for k in range(1, n_steps + 1):
        y = x + sd * rng.step_normals(keys, k)
        if killing:
            ev = _step_events(keys, k, x, y, 0.0, 0.0, False, klo, khi, True, bridge, s_dt)
            newly = alive & ((ev & 1) > 0)
            kill_steps[newly] = k
            alive &= ~newly
        y = np.where(alive, y, np.nan)
        out[:, k] = y
        x = y


def exit_batch(x0, sd, n_steps, seed, start, ulo, uhi, klo, khi, killing, bridge, s_dt,
               sample_idx, full, out_samples, out_exit, out_kill):
    count = out_samples.shape[0]
    keys = _keys(seed, start, count)
    sample_idx = np.asarray(sample_idx)
    out_samples[:, :] = np.nan
    out_exit[:] = -1
    out_kill[:] = -1
    if killing and not (klo < x0 < khi):
        out_kill[:] = 0
        out_exit[:] = 0
        return
    exited = np.zeros(count, dtype=bool)
    if not (ulo < x0 < uhi):
        out_exit[:] = 0
        exited[:] = True
    running = np.ones(count, dtype=bool) if (full or not exited.any()) else np.zeros(count, dtype=bool)
    for q in np.nonzero(sample_idx == 0)[0]:
        if running.any():
            out_samples[:, q] = x0
    x = np.full(count, float(x0))
    last_sample = int(sample_idx.max()) if sample_idx.size else 0
    for k in range(1, n_steps + 1):
        if not running.any():
            break
        if k > last_sample and exited[running].all():
            break
        y = x + sd * rng.step_normals(keys, k)
        ev = _step_events(keys, k, x, y, ulo, uhi, ~exited, klo, khi, killing, bridge, s_dt)
        ev[~running] = 0
        killed = (ev & 1) > 0
        out_kill[killed] = k
        left = ((ev & 2) > 0) & ~exited
        out_exit[left] = k
        exited |= left
        running &= ~killed
        if not full:
            running &= ~left
        for q in np.nonzero(sample_idx == k)[0]:
            out_samples[running, q] = y[running]
        x = y


def _run_inner(seed, idx, n, m, x_start, sigma, sd, ulo, uhi, track_u, klo, khi,
               killing, bridge, s_dt, alo, ahi, a_closed, targets):
    """Inner sums for many (path, n) restarts; returns array (len(idx), nt)."""
    nt = targets.shape[0]
    r = idx.shape[0]
    acc = np.zeros((r, nt))
    if r == 0:
        return acc
    keys = np.array([rng.inner_key(seed, int(i), int(nn), j)
                     for i, nn in zip(idx, n) for j in range(m)], dtype=np.uint64)
    owner = np.repeat(np.arange(r), m)
    sig = np.repeat(sigma, m)
    x = np.repeat(x_start, m).astype(float)
    alive = np.ones(r * m, dtype=bool)
    rel = targets[None, :] - sig[:, None]  # (r*m, nt)
    for q in range(nt):
        hit = (rel[:, q] == 0) & _member(x, alo, ahi, a_closed)
        np.add.at(acc[:, q], owner[hit], 1.0)
    last = int(rel.max())
    for k in range(1, last + 1):
        if not alive.any():
            break
        y = x + sd * rng.step_normals(keys, k)
        ev = _step_events(keys, k, x, y, ulo, uhi, track_u, klo, khi, killing, bridge, s_dt)
        alive &= ev == 0
        for q in range(nt):
            hit = alive & (rel[:, q] == k) & _member(y, alo, ahi, a_closed)
            if hit.any():
                np.add.at(acc[:, q], owner[hit], 1.0)
        x = y
    return acc / m


def mdh_batch(x0, sd, seed, start, ulo, uhi, blo, bhi, b_closed, alo, ahi, a_closed,
              klo, khi, killing, bridge, s_dt, targets, n_max, m_inner, single,
              out_lhs, out_part, out_terms, out_tau, out_sigma, out_xsigma):
    count = out_lhs.shape[0]
    targets = np.asarray(targets, dtype=np.int64)
    nt = targets.shape[0]
    keys = _keys(seed, start, count)
    out_lhs[:, :] = 0.0
    out_part[:, :] = 0.0
    out_terms[:, :, :] = 0.0
    out_tau[:, :] = -1
    out_sigma[:, :] = -1
    out_xsigma[:, :] = np.nan
    if killing and not (klo < x0 < khi):
        return
    ar = np.arange(count)
    x = np.full(count, float(x0))
    nsig = np.zeros(count, dtype=np.int64)
    alive_u = np.full(count, ulo < x0 < uhi)
    alive = np.ones(count, dtype=bool)
    phase = np.zeros(count, dtype=np.int64)
    if not (ulo < x0 < uhi):
        phase[:] = 2 if single else 1
        out_tau[:, 0] = 0
    for q in np.nonzero(targets == 0)[0]:
        if _member(np.array([x0]), alo, ahi, a_closed)[0]:
            out_lhs[:, q] = 1.0
            out_part[alive_u, q] = 1.0
    if not single and phase[0] == 1 and _member(np.array([x0]), blo, bhi, b_closed)[0]:
        out_sigma[:, 0] = 0
        out_xsigma[:, 0] = x0
        nsig[:] = 1
        phase[:] = 0
    n_steps = int(targets[-1])
    for k in range(1, n_steps + 1):
        y = x + sd * rng.step_normals(keys, k)
        ev = _step_events(keys, k, x, y, ulo, uhi, phase == 0, klo, khi, killing, bridge, s_dt)
        ev[~alive] = 0
        killed = (ev & 1) > 0
        rec = killed & (phase == 0) & (nsig < n_max)
        if single:
            rec &= nsig == 0
        out_tau[ar[rec], nsig[rec]] = k
        alive &= ~killed
        left = alive & (phase == 0) & ((ev & 2) > 0)
        alive_u &= ~left
        rec = left & (nsig < n_max)
        out_tau[ar[rec], nsig[rec]] = k
        if single:
            out_sigma[left, 0] = k
            out_xsigma[left, 0] = y[left]
            nsig[left] = 1
            phase[left] = 2
        else:
            phase[left] = 1
            enter = alive & (phase == 1) & _member(y, blo, bhi, b_closed)
            rec = enter & (nsig < n_max)
            out_sigma[ar[rec], nsig[rec]] = k
            out_xsigma[ar[rec], nsig[rec]] = y[rec]
            nsig[enter] += 1
            phase[enter] = 0
        for q in np.nonzero(targets == k)[0]:
            inA = alive & _member(y, alo, ahi, a_closed)
            out_lhs[inA, q] = 1.0
            out_part[inA & alive_u, q] = 1.0
        x = y
    if single and not (ulo < x0 < uhi):
        out_sigma[:, 0] = 0
        out_xsigma[:, 0] = x0
    ii, nn = np.nonzero(out_sigma >= 0)
    if ii.size and m_inner > 0:
        acc = _run_inner(seed, start + ii, nn, m_inner, out_xsigma[ii, nn], out_sigma[ii, nn],
                         sd, ulo, uhi, not single, klo, khi, killing, bridge, s_dt,
                         alo, ahi, a_closed, targets)
        out_terms[ii, nn, :] = acc


def walk_batch(v0, n_steps, seed, start, nbrs, deg, out):
    count = out.shape[0]
    keys = _keys(seed, start, count)
    v = np.full(count, int(v0), dtype=np.int64)
    out[:, 0] = v
    for k in range(1, n_steps + 1):
        u = rng.walk_uniforms(keys, k)
        c = (u * deg[v]).astype(np.int64)
        v = nbrs[v, c]
        out[:, k] = v
