"""Trajectory hot loop: numba-jitted by default, pure-numpy fallback otherwise.

Set MEMHOP_DISABLE_NUMBA=1 (or run without numba installed) to select the
fallback. Both paths execute the same source with the same explicit
xoshiro256++ stream, so a given (seed, model, config) produces the same
trajectory on either path.

The RNG state lives in a uint64[4] array mutated in place; all integer
constants are pre-bound as numpy uint64 scalars so the wrap-around
arithmetic is identical under numba and under plain numpy (where the
overflow warnings are suppressed around kernel calls).
"""

from __future__ import annotations

import functools
import math
import os
import types

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_DISABLED = os.environ.get("MEMHOP_DISABLE_NUMBA", "").strip().lower() in {
    "1", "true", "yes", "on"}
NUMBA_ENABLED = (numba is not None) and not NUMBA_DISABLED

# trajectory termination status codes
STATUS_OK = 0
STATUS_FROZEN = 1
STATUS_MAX_EVENTS = 2
STATUS_NONFINITE = 3
STATUS_NEGATIVE_RATE = 4

_U = np.uint64
_GOLD = _U(0x9E3779B97F4A7C15)
_MIX1 = _U(0xBF58476D1CE4E5B9)
_MIX2 = _U(0x94D049BB133111EB)
_STREAM_SALT = _U(0x6C62272E07BB0142)
_S30 = _U(30)
_S27 = _U(27)
_S31 = _U(31)
_S11 = _U(11)
_S17 = _U(17)
_S23 = _U(23)
_S41 = _U(41)
_S45 = _U(45)
_S19 = _U(19)
_ZERO = _U(0)
_DNORM = float(2.0 ** -53)
_OVERFLOW_GUARD = 1e300


def _sm64(state):
    # splitmix64 step; state is uint64[1], mutated in place
    state[0] = state[0] + _GOLD
    z = state[0]
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


def _seed_stream(rng, base_seed, stream):
    # fill xoshiro256++ state (uint64[4]) from splitmix64 over (seed, stream)
    tmp = np.empty(1, dtype=np.uint64)
    tmp[0] = _U(base_seed) ^ (_U(stream) * _STREAM_SALT)
    for i in range(4):
        rng[i] = _sm64(tmp)
    if (rng[0] | rng[1] | rng[2] | rng[3]) == _ZERO:
        rng[0] = _GOLD


def _next_u64(rng):
    # xoshiro256++
    s0 = rng[0]
    s3 = rng[3]
    x = s0 + s3
    result = ((x << _S23) | (x >> _S41)) + s0
    t = rng[1] << _S17
    rng[2] = rng[2] ^ s0
    rng[3] = s3 ^ rng[1]
    rng[1] = rng[1] ^ rng[2]
    rng[0] = s0 ^ rng[3]
    rng[2] = rng[2] ^ t
    r3 = rng[3]
    rng[3] = (r3 << _S45) | (r3 >> _S19)
    return result


def _uniform(rng):
    # in [0, 1)
    return float(_next_u64(rng) >> _S11) * _DNORM


def _trajectory(
    # graph (CSR adjacency + directed-edge indices)
    indptr, nbr, edge_out, edge_rev,
    # Hamiltonian: directed entries per slice, slice start times
    hvals, slice_starts,
    # mutable trajectory state
    avals, tbar, rng,
    # scalars
    node0, t0, t_end, hbar, hbar2,
    clamp_rates, time_dep, max_events,
    # snapshot recording (snap_times sorted ascending, <= t_end)
    snap_times, snap_nodes,
    # recurrence tallies per directed edge
    rec_count, rec_sum,
    # optional event log (arrays sized >= max_events when recording)
    record, log_from, log_to, log_t, log_dt, log_rate,
    watch_edge, log_watch_re, log_watch_im,
    # branch-switch counting
    count_switches, branch_label, branch_t_from,
    # scratch, sized >= max node degree
    rates_buf,
):
    n_slices = slice_starts.shape[0]
    n_snap = snap_times.shape[0]
    node = node0
    t = t0
    events = 0
    status = STATUS_OK
    err_edge = -1
    n_switches = 0
    last_branch = -1
    if count_switches:
        lb0 = branch_label[node]
        if lb0 >= 0:
            last_branch = lb0
    s_idx = 0
    while s_idx + 1 < n_slices and slice_starts[s_idx + 1] <= t:
        s_idx += 1
    snap_ptr = 0
    while snap_ptr < n_snap and snap_times[snap_ptr] < t:
        snap_ptr += 1

    while True:
        k0 = indptr[node]
        k1 = indptr[node + 1]
        lam = 0.0
        for k in range(k0, k1):
            d = edge_out[k]
            a = avals[d]
            if time_dep:
                # The stored value carries the coupling scale of its last
                # refresh epoch (the reverse direction's last traversal,
                # t=0 for never-traversed edges). Rates read it brought to
                # the current coupling: the pending slice-ratio factor.
                tb_rev = tbar[edge_rev[k]]
                s_old = 0
                while s_old + 1 < n_slices and slice_starts[s_old + 1] <= tb_rev:
                    s_old += 1
                if s_old != s_idx:
                    den = hvals[s_old, d]
                    if den.real != 0.0 or den.imag != 0.0:
                        a = a * (hvals[s_idx, d] / den)
            r = -a.imag / hbar + math.hypot(a.real, a.imag) / hbar2
            if r < 0.0:
                if clamp_rates:
                    r = 0.0
                else:
                    status = STATUS_NEGATIVE_RATE
                    err_edge = edge_out[k]
                    break
            rates_buf[k - k0] = r
            lam += r
        if status != STATUS_OK:
            break
        if lam <= 0.0:
            status = STATUS_FROZEN
            break

        u = _uniform(rng)
        wait = -math.log1p(-u) / lam
        t_next = t + wait
        if t_next > t_end:
            t = t_end
            break
        if events >= max_events:
            status = STATUS_MAX_EVENTS
            break

        while snap_ptr < n_snap and snap_times[snap_ptr] < t_next:
            snap_nodes[snap_ptr] = node
            snap_ptr += 1
        while s_idx + 1 < n_slices and slice_starts[s_idx + 1] <= t_next:
            s_idx += 1

        # destination slot, proportional to rates
        target = _uniform(rng) * lam
        acc = 0.0
        pick = -1
        for k in range(k0, k1):
            r = rates_buf[k - k0]
            if r > 0.0:
                pick = k
                acc += r
                if target < acc:
                    break
        k = pick
        m = nbr[k]
        d_fwd = edge_out[k]
        d_rev = edge_rev[k]

        t = t_next
        events += 1

        tb = tbar[d_fwd]
        delta = t - tb
        if tb > 0.0:
            rec_count[d_fwd] += 1.0
            rec_sum[d_fwd] += delta

        if d_fwd != d_rev:
            # Phi = sum of potentials on directed edges out of the new node m
            # (loop included), pre-update values
            phr = 0.0
            phi = 0.0
            for k2 in range(indptr[m], indptr[m + 1]):
                a2 = avals[edge_out[k2]]
                phr += a2.real
                phi += a2.imag
            theta = phr * delta / hbar
            mag = phi * delta / hbar
            if mag > 700.0 or mag < -700.0:
                # the +/- magnitude factors would overflow/underflow float64
                status = STATUS_NONFINITE
                err_edge = d_fwd
                break
            grow = math.exp(mag)
            c = math.cos(theta)
            s = math.sin(theta)
            ginv = 1.0 / grow
            af = avals[d_fwd]
            ar = avals[d_rev]
            # fwd *= exp(-i*Phi*delta) = grow * (c - i*s)
            avals[d_fwd] = complex(grow * (af.real * c + af.imag * s),
                                   grow * (af.imag * c - af.real * s))
            # rev *= exp(+i*Phi*delta) = (1/grow) * (c + i*s)
            avals[d_rev] = complex(ginv * (ar.real * c - ar.imag * s),
                                   ginv * (ar.imag * c + ar.real * s))
            if time_dep:
                s_old = 0
                while s_old + 1 < n_slices and slice_starts[s_old + 1] <= tb:
                    s_old += 1
                if s_old != s_idx:
                    den = hvals[s_old, d_rev]
                    if den.real == 0.0 and den.imag == 0.0:
                        status = STATUS_NONFINITE
                        err_edge = d_rev
                        break
                    avals[d_rev] = avals[d_rev] * (hvals[s_idx, d_rev] / den)
        else:
            # loop jump: the two phase factors cancel exactly; only the
            # slice-ratio rule can change the stored value
            if time_dep:
                s_old = 0
                while s_old + 1 < n_slices and slice_starts[s_old + 1] <= tb:
                    s_old += 1
                if s_old != s_idx:
                    den = hvals[s_old, d_fwd]
                    if den.real == 0.0 and den.imag == 0.0:
                        status = STATUS_NONFINITE
                        err_edge = d_fwd
                        break
                    avals[d_fwd] = avals[d_fwd] * (hvals[s_idx, d_fwd] / den)

        af = avals[d_fwd]
        ar = avals[d_rev]
        if (not math.isfinite(af.real) or not math.isfinite(af.imag)
                or not math.isfinite(ar.real) or not math.isfinite(ar.imag)
                or math.hypot(af.real, af.imag) > _OVERFLOW_GUARD
                or math.hypot(ar.real, ar.imag) > _OVERFLOW_GUARD):
            status = STATUS_NONFINITE
            err_edge = d_fwd
            break

        tbar[d_fwd] = t

        if record:
            i = events - 1
            log_from[i] = node
            log_to[i] = m
            log_t[i] = t
            log_dt[i] = wait
            log_rate[i] = lam
            if watch_edge >= 0:
                aw = avals[watch_edge]
                log_watch_re[i] = aw.real
                log_watch_im[i] = aw.imag

        if count_switches:
            lb = branch_label[m]
            if lb >= 0:
                if lb != last_branch and last_branch >= 0 and t >= branch_t_from:
                    n_switches += 1
                last_branch = lb

        node = m

    if status == STATUS_OK:
        while snap_ptr < n_snap:
            snap_nodes[snap_ptr] = node
            snap_ptr += 1
    return node, t, events, status, err_edge, n_switches


def _errstate(fn):
    @functools.wraps(fn)
    def wrapper(*args):
        with np.errstate(over="ignore"):
            return fn(*args)
    return wrapper


def _clone(fn, overrides):
    """Copy fn with selected globals replaced (plain name -> jitted name)."""
    g = dict(fn.__globals__)
    g.update(overrides)
    return types.FunctionType(fn.__code__, g, fn.__name__, fn.__defaults__,
                              fn.__closure__)


# Pure-python family (fallback path, unit-test reference, benchmarks).
sm64_py = _errstate(_sm64)
seed_stream_py = _errstate(_seed_stream)
next_u64_py = _errstate(_next_u64)
uniform_py = _errstate(_uniform)
trajectory_py = _errstate(_trajectory)

# Jitted family, rebuilt with globals pointing at jitted helpers.
if numba is not None:
    _jit = functools.partial(numba.njit, cache=True, nogil=True)
    sm64_jit = _jit(_sm64)
    seed_stream_jit = _jit(_clone(_seed_stream, {"_sm64": sm64_jit}))
    next_u64_jit = _jit(_next_u64)
    uniform_jit = _jit(_clone(_uniform, {"_next_u64": next_u64_jit}))
    trajectory_jit = _jit(_clone(_trajectory, {"_uniform": uniform_jit}))
else:
    sm64_jit = None
    seed_stream_jit = None
    next_u64_jit = None
    uniform_jit = None
    trajectory_jit = None

# Default dispatch per the env flag.
if NUMBA_ENABLED:
    seed_stream = seed_stream_jit
    uniform = uniform_jit
    trajectory = trajectory_jit
else:
    seed_stream = seed_stream_py
    uniform = uniform_py
    trajectory = trajectory_py


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
