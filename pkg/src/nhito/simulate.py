"""Euler simulation of non-homogeneous Ito processes.

Paths are generated in fixed-size chunks. Chunk ``c`` of a run keyed by
``(seed, stream_index)`` draws from its own generator seeded with
``SeedSequence(seed, spawn_key=(stream_index, c))``, so results do not depend
on the number of worker threads.

Distances to the starting point, exit radii and running suprema all use the
maximum norm.
"""

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from math import ceil

import numpy as np

from .errors import NumericalFailure
from .model import eval_characteristics

CHUNK = 8192
RECORD_MODES = ("full-path", "endpoint-and-sup")


@dataclass(frozen=True)
class SimConfig:
    """Discretization and randomness settings for a simulation run."""

    step: float
    horizon: float
    seed: int = 0
    stream_index: int = 0
    small_jump_cutoff: float = 0.01
    record_mode: str = "full-path"

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if not np.isfinite(self.horizon) or self.step > self.horizon * (1 + 1e-12):
            raise ValueError("step must not exceed a finite horizon")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if int(self.stream_index) < 0:
            raise ValueError("stream index must be nonnegative")
        if not 0 < self.small_jump_cutoff < 1:
            raise ValueError("small-jump cutoff must lie in (0, 1)")
        if self.record_mode not in RECORD_MODES:
            raise ValueError(f"record mode must be one of {RECORD_MODES}")


@dataclass
class PathSample:
    """One trajectory.

    ``jump_marks`` holds ``(time, jump, state_after)`` triples; the state
    after a jump is the left grid state plus the jumps of the same Euler step
    up to and including this one. Exact stable increments carry no marks.
    """

    tau: float
    x: np.ndarray
    times: np.ndarray
    states: np.ndarray
    jump_marks: list = field(default_factory=list)
    exit_records: dict = field(default_factory=dict)
    sup: float = 0.0

    @property
    def endpoint(self):
        return self.states[-1]


@dataclass
class PathBatch:
    """Summary of many paths sharing start point and grid.

    ``exit_times[R]`` is ``nan`` for paths that stay within ``R``;
    ``sups[:, j]`` and ``states_at[:, j]`` refer to ``checkpoints[j]``
    (lags after ``tau``).
    """

    tau: float
    x: np.ndarray
    times: np.ndarray
    endpoints: np.ndarray
    exit_times: dict
    checkpoints: np.ndarray
    sups: np.ndarray
    states_at: np.ndarray
    stopped: np.ndarray = None
    paths: np.ndarray = None


# --------------------------------------------------------------------------
# grids and random variates
# --------------------------------------------------------------------------


def time_grid(tau, horizon, step, marks=()):
    """Uniform grid on ``[tau, tau+horizon]`` with step at most ``step``.

    Each lag in ``marks`` inside ``(0, horizon)`` is inserted exactly.
    """
    n = max(1, ceil(horizon / step - 1e-9))
    grid = tau + horizon * np.arange(n + 1) / n
    grid[-1] = tau + horizon
    tol = 1e-12 * max(1.0, abs(tau) + horizon)
    extra = []
    for m in marks:
        if not 0 < m < horizon:
            continue
        t = tau + m
        i = int(np.argmin(np.abs(grid - t)))
        if abs(grid[i] - t) <= tol:
            grid[i] = t
        else:
            extra.append(t)
    if extra:
        grid = np.unique(np.concatenate([grid, extra]))
    return grid


def _rng(seed, stream, chunk):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(chunk)))))


def symmetric_stable(rng, alpha, size):
    """Standard symmetric stable variates with cf exp(-|u|^alpha) (Chambers-Mallows-Stuck)."""
    v = rng.uniform(-np.pi / 2, np.pi / 2, size)
    w = rng.standard_exponential(size)
    if alpha == 1.0:
        return np.tan(v)
    return np.sin(alpha * v) / np.cos(v) ** (1.0 / alpha) * (np.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha)


def positive_stable(rng, beta, size):
    """Positive stable variates with Laplace transform exp(-s^beta), 0 < beta < 1 (Kanter)."""
    u = rng.uniform(0.0, 1.0, size)
    e = rng.standard_exponential(size)
    a = np.sin(beta * np.pi * u) / np.sin(np.pi * u) ** (1.0 / beta)
    return a * (np.sin((1.0 - beta) * np.pi * u) / e) ** ((1.0 - beta) / beta)


def rotational_stable(rng, alpha, n, d):
    """Variates in R^d with cf exp(-|u|^alpha), Euclidean norm."""
    if d == 1:
        return symmetric_stable(rng, alpha, (n, 1))
    a = positive_stable(rng, alpha / 2.0, (n, 1))
    return np.sqrt(2.0 * a) * rng.standard_normal((n, d))


def _uniform_directions(rng, n, d):
    g = rng.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def psd_factor(q):
    """Symmetric square root of a stack of PSD matrices, clipping roundoff negatives."""
    q = 0.5 * (q + np.swapaxes(q, -1, -2))
    if q.shape[-1] == 1:
        v = q[..., 0, 0]
        if np.any(v < -1e-10 * np.abs(v).max(initial=0.0)):
            raise NumericalFailure("diffusion matrix is not positive semidefinite")
        return np.sqrt(np.maximum(v, 0.0))[..., None, None]
    w, vecs = np.linalg.eigh(q)
    rho = np.abs(w).max(axis=-1, keepdims=True)
    if np.any(w < -1e-10 * rho):
        raise NumericalFailure("diffusion matrix is not positive semidefinite")
    return (vecs * np.sqrt(np.maximum(w, 0.0))[..., None, :]) @ np.swapaxes(vecs, -1, -2)


# --------------------------------------------------------------------------
# one Euler step
# --------------------------------------------------------------------------


def _is_zero(f):
    return f.kind == "constant" and not np.any(f.params["value"])


class _Stepper:
    """Model-specific Euler increments for a batch of states."""

    def __init__(self, model, cfg, tau, x):
        self.model = model
        self.cfg = cfg
        self._tau = tau
        self.k = model.lift_depth
        self.d = model.base_dimension
        self.has_diffusion = not _is_zero(model.diffusion) and not model.is_det_jump
        self.uniform = not model.state_dependent
        fam = model.jumps.family
        self.family = "det" if model.is_det_jump else fam
        self.exact_stable = fam == "symmetric-alpha-stable" and not model.jumps.scale.state_dependent
        self.jump_lag = None
        if self.family == "det":
            clock0 = tau if self.k == 0 else float(x[self.k - 1])
            if clock0 < 1.0 <= clock0 + cfg.horizon:
                self.jump_lag = 1.0 - clock0

    def _advance_clock(self, X, lag):
        if self.k == 0:
            return X
        X = X.copy()
        X[:, : self.k] += np.reshape(lag, (-1, 1))
        return X

    def _eval(self, t, X):
        if self.uniform:
            ell, q, kern = eval_characteristics(self.model, t, X[:1])
            return np.broadcast_to(ell, X.shape), q, kern
        return eval_characteristics(self.model, t, X)

    def increment(self, t, dt, X, rng, marks=None):
        m = X.shape[0]
        ell, q, kern = self._eval(t, X)
        dX = ell * dt
        if self.has_diffusion:
            sig = psd_factor(q)
            z = rng.standard_normal((m, X.shape[1]))
            dX = dX + np.sqrt(dt) * np.einsum("...ij,...j->...i", sig, z)
        if self.family == "compound-poisson":
            self._poisson_jumps(t, dt, X, rng, dX, marks)
        elif self.family == "symmetric-alpha-stable":
            if self.exact_stable:
                g = np.broadcast_to(kern.gamma, (m,)) if kern.gamma.ndim else np.full(m, float(kern.gamma))
                scale = (g**kern.alpha * dt) ** (1.0 / kern.alpha)
                dX[:, self.k :] += scale[:, None] * rotational_stable(rng, kern.alpha, m, self.d)
            else:
                self._stable_cutoff(t, dt, X, kern, rng, dX, marks)
        elif self.family == "det" and self.jump_lag is not None:
            tj = self._tau + self.jump_lag
            if t < tj <= t + dt * (1 + 1e-12):
                jump = np.zeros(self.d)
                jump[0] = 1.0
                dX[:, self.k] += 1.0
                if marks is not None:
                    for i in range(m):
                        marks.append((i, tj, jump.copy(), X[i].copy()))
        return dX

    def _thin(self, t, dt, X, rng, rate_fn, bound):
        """Accepted candidate (path index, time) pairs by thinning against ``bound``."""
        if not np.all(np.isfinite(bound)):
            raise NumericalFailure("local jump-intensity bound is not finite")
        while True:
            counts = rng.poisson(bound * dt)
            idx = np.repeat(np.arange(X.shape[0]), counts)
            u = t + dt * rng.uniform(0.0, 1.0, idx.size)
            rates = rate_fn(u, idx)
            over = rates > bound[idx] * (1 + 1e-12)
            if not np.any(over):
                break
            bound = bound * 2.0
        keep = rng.uniform(0.0, 1.0, idx.size) * bound[idx] < rates
        idx, u = idx[keep], u[keep]
        order = np.lexsort((u, idx))
        return idx[order], u[order]

    def _local_bound(self, t, dt, X, rate_at):
        b = np.maximum.reduce([rate_at(t + f * dt, self._advance_clock(X, f * dt)) for f in (0.0, 0.5, 1.0)])
        return np.broadcast_to(1.25 * b + 1e-12, (X.shape[0],)).astype(float)

    def _poisson_jumps(self, t, dt, X, rng, dX, marks):
        model = self.model

        def rate_at(s, Y):
            _, _, kern = eval_characteristics(model, s, Y)
            return np.maximum(np.asarray(kern.rate, dtype=float), 0.0)

        bound = self._local_bound(t, dt, X, rate_at)
        rate_fn = lambda u, idx: np.broadcast_to(rate_at(u, self._advance_clock(X[idx], u - t)), idx.shape)
        idx, u = self._thin(t, dt, X, rng, rate_fn, bound)
        if idx.size == 0:
            return
        jumps = model.jumps.law.sample(rng, idx.size, self.d)
        np.add.at(dX[:, self.k :], idx, jumps)
        self._record(marks, X, idx, u, jumps)

    def _stable_cutoff(self, t, dt, X, kern, rng, dX, marks):
        eps = self.cfg.small_jump_cutoff
        model = self.model

        def big_rate(s, Y):
            _, _, kk = eval_characteristics(model, s, Y)
            return np.asarray(kk.big_jump_rate(eps), dtype=float)

        var = np.broadcast_to(kern.small_jump_variance(eps), (X.shape[0],))
        dX[:, self.k :] += np.sqrt(var * dt)[:, None] * rng.standard_normal((X.shape[0], self.d))
        bound = self._local_bound(t, dt, X, big_rate)
        rate_fn = lambda u, idx: np.broadcast_to(big_rate(u, self._advance_clock(X[idx], u - t)), idx.shape)
        idx, u = self._thin(t, dt, X, rng, rate_fn, bound)
        if idx.size == 0:
            return
        radius = eps * rng.uniform(0.0, 1.0, idx.size) ** (-1.0 / kern.alpha)
        jumps = radius[:, None] * _uniform_directions(rng, idx.size, self.d)
        np.add.at(dX[:, self.k :], idx, jumps)
        self._record(marks, X, idx, u, jumps)

    def _record(self, marks, X, idx, u, jumps):
        if marks is None:
            return
        running = {}
        for i, s, j in zip(idx.tolist(), u.tolist(), jumps):
            base = running.get(i, X[i].copy())
            base = base.copy()
            base[self.k :] += j
            running[i] = base
            marks.append((i, s, j.copy(), base))


# --------------------------------------------------------------------------
# chunk driver
# --------------------------------------------------------------------------


def _maxnorm(a):
    return np.max(np.abs(a), axis=-1)


def _run_chunk(model, tau, x, cfg, times, m, chunk, radii, stop_radius, cp_index, keep_paths, want_marks):
    rng = _rng(cfg.seed, cfg.stream_index, chunk)
    stepper = _Stepper(model, cfg, tau, x)
    X = np.broadcast_to(x, (m, x.size)).copy()
    exit_t = {R: np.full(m, np.nan) for R in radii}
    stopped = np.zeros(m, dtype=bool)
    sup = np.zeros(m)
    sups = np.zeros((m, len(cp_index)))
    states_at = np.zeros((m, len(cp_index), x.size))
    cp_pos = {}
    for c, j in enumerate(cp_index):
        cp_pos.setdefault(j, []).append(c)
    for c in cp_pos.get(0, ()):
        states_at[:, c] = X
    paths = np.empty((m, len(times), x.size)) if keep_paths else None
    if keep_paths:
        paths[:, 0] = X
    marks = [] if want_marks else None
    for i in range(len(times) - 1):
        t, dt = times[i], times[i + 1] - times[i]
        step_marks = [] if want_marks else None
        dX = stepper.increment(t, dt, X, rng, step_marks)
        if stop_radius is not None:
            dX[stopped] = 0.0
        if want_marks:
            marks.extend(mk for mk in step_marks if not stopped[mk[0]])
        X = X + dX
        dist = _maxnorm(X - x)
        sup = np.maximum(sup, dist)
        t1 = times[i + 1]
        for R in radii:
            new = np.isnan(exit_t[R]) & (dist > R)
            exit_t[R][new] = t1
        if stop_radius is not None:
            stopped |= dist > stop_radius
        if keep_paths:
            paths[:, i + 1] = X
        for c in cp_pos.get(i + 1, ()):
            sups[:, c] = sup
            states_at[:, c] = X
    return X, exit_t, stopped, sups, states_at, paths, marks


def _plan(model, tau, x, cfg, checkpoints):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != model.dimension:
        raise ValueError(f"start state has size {x.size}, model dimension is {model.dimension}")
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    marks = list(checkpoints)
    probe = _Stepper(model, cfg, tau, x)
    if probe.jump_lag is not None:
        marks.append(probe.jump_lag)
    times = time_grid(tau, cfg.horizon, cfg.step, marks)
    cp_index = []
    for c in checkpoints:
        if not 0 <= c <= cfg.horizon * (1 + 1e-12):
            raise ValueError("checkpoints must lie in [0, horizon]")
        cp_index.append(int(np.argmin(np.abs(times - (tau + c)))))
    return x, times, cp_index


def simulate_path(model, tau, x, cfg, radii=()):
    """Simulate one trajectory on ``[tau, tau + cfg.horizon]``."""
    x, times, _ = _plan(model, tau, x, cfg, ())
    full = cfg.record_mode == "full-path"
    last = [len(times) - 1]
    X, exit_t, _, sups, _, paths, marks = _run_chunk(model, tau, x, cfg, times, 1, 0, tuple(radii), None, last, full, full)
    if full:
        states, states_times = paths[0], times
    else:
        states, states_times = np.stack([x, X[0]]), np.array([times[0], times[-1]])
    sup = float(sups[0, 0])
    exits = {R: float(v[0]) for R, v in exit_t.items() if np.isfinite(v[0])}
    jm = [(s, j, st) for _, s, j, st in marks] if marks else []
    return PathSample(tau, x, states_times, states, jm, exits, sup)


def simulate_paths(
    model, tau, x, cfg, n_paths, radii=(), stop_radius=None, checkpoints=(), keep_paths=False, workers=1
):
    """Simulate ``n_paths`` trajectories and collect summary statistics.

    The horizon is always a checkpoint (the last column of ``sups``).
    """
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    checkpoints = tuple(float(c) for c in checkpoints) + (cfg.horizon,)
    x, times, cp_index = _plan(model, tau, x, cfg, checkpoints)
    sizes = [min(CHUNK, n_paths - s) for s in range(0, n_paths, CHUNK)]
    args = [
        (model, tau, x, cfg, times, m, c, tuple(radii), stop_radius, cp_index, keep_paths, False)
        for c, m in enumerate(sizes)
    ]
    if workers > 1 and len(args) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda a: _run_chunk(*a), args))
    else:
        parts = [_run_chunk(*a) for a in args]
    cat = lambda i: np.concatenate([p[i] for p in parts])
    exit_times = {R: np.concatenate([p[1][R] for p in parts]) for R in radii}
    return PathBatch(
        tau=tau,
        x=x,
        times=times,
        endpoints=cat(0),
        exit_times=exit_times,
        checkpoints=np.array(checkpoints),
        sups=cat(3),
        states_at=cat(4),
        stopped=cat(2) if stop_radius is not None else None,
        paths=cat(5) if keep_paths else None,
    )


def simulate_stopped(model, tau, x, R, h, cfg, n_paths=None, workers=1):
    """State of the process stopped at its first grid exit from the ``R``-ball, at lag ``h``.

    The Euler step is ``min(cfg.step, h/64)``. With ``n_paths=None`` returns
    ``(endpoint, exited)`` for a single path; otherwise arrays of both.
    """
    if not R > 0 or not h > 0:
        raise ValueError("R and h must be positive")
    sub = replace(cfg, horizon=h, step=min(cfg.step, h / 64.0))
    stop = None if np.isinf(R) else float(R)
    batch = simulate_paths(model, tau, x, sub, 1 if n_paths is None else n_paths, stop_radius=stop, workers=workers)
    exited = batch.stopped if stop is not None else np.zeros(len(batch.endpoints), dtype=bool)
    if n_paths is None:
        return batch.endpoints[0], bool(exited[0])
    return batch.endpoints, exited


def running_sup(path, t):
    """Max-norm distance to the start over grid times and jump marks in ``[tau, tau+t]``."""
    if t < 0 or t > path.times[-1] - path.tau + 1e-12:
        raise ValueError("lag outside the simulated horizon")
    limit = path.tau + t * (1 + 1e-15) + 1e-15
    sel = path.times <= limit
    best = float(np.max(_maxnorm(path.states[sel] - path.x)))
    for s, _, state in path.jump_marks:
        if s <= limit:
            best = max(best, float(np.max(np.abs(state - path.x))))
    return best


# --------------------------------------------------------------------------
# binary path dump
# --------------------------------------------------------------------------

MAGIC = b"NHPD"
_HEADER = struct.Struct("<4sHHH32sQQddI")
_BLOCK = struct.Struct("<dII")


def write_path_dump(fh, model, cfg, samples):
    """Write ``samples`` (PathSample list) to the binary file object ``fh``.

    Layout (little endian): header ``magic[4] version:u16 dim:u16
    base_dim:u16 model_sha256[32] seed:u64 stream:u64 step:f64 horizon:f64 n_paths:u32``;
    then per path ``tau:f64 n_times:u32 n_marks:u32``, ``times f64[n_times]``,
    ``states f64[n_times*dim]`` (row major), and per mark
    ``time:f64 jump f64[base_dim]``.
    """
    dim = model.dimension
    fh.write(
        _HEADER.pack(
            MAGIC, 1, dim, model.base_dimension, bytes.fromhex(model.hash()), int(cfg.seed), int(cfg.stream_index),
            float(cfg.step), float(cfg.horizon), len(samples),
        )
    )
    for p in samples:
        fh.write(_BLOCK.pack(float(p.tau), len(p.times), len(p.jump_marks)))
        fh.write(np.asarray(p.times, dtype="<f8").tobytes())
        fh.write(np.asarray(p.states, dtype="<f8").tobytes())
        for s, j, _ in p.jump_marks:
            fh.write(struct.pack("<d", float(s)))
            fh.write(np.asarray(j, dtype="<f8").tobytes())


def read_path_dump(fh):
    """Inverse of :func:`write_path_dump`; returns ``(header dict, [(tau, times, states, marks)])``."""
    raw = fh.read(_HEADER.size)
    magic, version, dim, bd, digest, seed, stream, step, horizon, n = _HEADER.unpack(raw)
    if magic != MAGIC or version != 1:
        raise ValueError("not a path dump")
    header = dict(dim=dim, model_hash=digest.hex(), seed=seed, stream_index=stream, step=step, horizon=horizon)
    out = []
    for _ in range(n):
        tau, nt, nm = _BLOCK.unpack(fh.read(_BLOCK.size))
        times = np.frombuffer(fh.read(8 * nt), dtype="<f8")
        states = np.frombuffer(fh.read(8 * nt * dim), dtype="<f8").reshape(nt, dim)
        marks = []
        for _ in range(nm):
            (s,) = struct.unpack("<d", fh.read(8))
            marks.append((s, np.frombuffer(fh.read(8 * bd), dtype="<f8")))
        out.append((tau, times, states, marks))
    return header, out
