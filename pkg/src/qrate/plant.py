"""Closed-loop continuous-time integration of the plant together with the
controller's auxiliary model, and the full sampled protocol loop.

Integration is exact zero-order-hold stepping (block matrix exponentials)
on every subinterval where the disturbance is constant, and fixed-step RK4
otherwise.  Substeps are split at disturbance discontinuities so the ZOH
path stays exact for pulse-type signals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import codec
from .codec import CodecState, Stage
from .design import DerivedConstants, DesignParams, PlantModel
from .matnum import as_vector
from .signals import Disturbance

__all__ = ["TrajectoryEvent", "TrajectoryLog", "sup_norm_on", "step_interval", "run_closed_loop"]

DEFAULT_SUBSTEPS = 100


@dataclass(frozen=True)
class TrajectoryEvent:
    kind: str  # "captured" or "escaped"
    k: int
    t: float


@dataclass(eq=False)
class TrajectoryLog:
    """Sampled and dense records of one closed-loop run.

    Sample arrays are indexed by k = 0..n_samples; dense arrays carry the
    substep-resolution trajectory with ``dense_k`` mapping each record to
    its sampling interval.  ``xhat`` holds the post-reset auxiliary state.
    """

    t: np.ndarray
    x: np.ndarray
    xhat: np.ndarray
    symbol: np.ndarray
    stage: np.ndarray          # 1 stabilizing, 0 searching
    radius: np.ndarray         # quantization radius E_k
    center: np.ndarray         # shared range center
    value: np.ndarray          # V_k from the shared bookkeeping
    d_sup_prev: np.ndarray     # sup norm of d over [t_{k-1}, t_k], 0 at k=0
    dense_t: np.ndarray
    dense_k: np.ndarray
    dense_x: np.ndarray
    dense_xhat: np.ndarray
    dense_u: np.ndarray
    events: list[TrajectoryEvent]
    enc_states: list[CodecState]
    dec_states: list[CodecState]
    x0: np.ndarray
    horizon: float
    substeps: int

    @property
    def n_samples(self) -> int:
        return self.t.size


def sup_norm_on(sig: Disturbance, a: float, b: float) -> float:
    """Exact sup norm of the signal over [a, b]."""
    return sig.sup_norm(a, b)


def _augmented(m: PlantModel, stage: Stage) -> np.ndarray:
    """Block dynamics of z = (x, xhat) for one stage."""
    n = m.n_x
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = m.A
    if stage is Stage.STABILIZING:
        M[:n, n:] = m.B @ m.K
        M[n:, n:] = m.closed_loop()
    else:
        M[n:, n:] = m.A
    return M


def _zoh_pair(M: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """(e^{Mh}, integral of e^{Ms} ds over [0, h]) via one block exponential."""
    n = M.shape[0]
    blk = np.zeros((2 * n, 2 * n))
    blk[:n, :n] = M
    blk[:n, n:] = np.eye(n)
    E = scipy.linalg.expm(blk * h)
    return E[:n, :n], E[:n, n:]


def _rk4_step(M: np.ndarray, w_of, a: float, h: float, z: np.ndarray) -> np.ndarray:
    k1 = M @ z + w_of(a)
    k2 = M @ (z + 0.5 * h * k1) + w_of(a + 0.5 * h)
    k3 = M @ (z + 0.5 * h * k2) + w_of(a + 0.5 * h)
    k4 = M @ (z + h * k3) + w_of(a + h)
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_interval(m: PlantModel, x: np.ndarray, xhat: np.ndarray, stage: Stage,
                  sig: Disturbance, t_k: float, substeps: int = DEFAULT_SUBSTEPS,
                  zoh_cache: dict | None = None, decimation: int = 1):
    """Integrate one sampling period from t_k.

    Returns (x at the end of the period, xhat at the end of the period,
    dense records (t, x, xhat, u) at substep resolution).  ``xhat`` must
    already be reset for the interval.
    """
    n = m.n_x
    z = np.concatenate([as_vector(x, "x"), as_vector(xhat, "xhat")])
    M = _augmented(m, stage)
    edges = t_k + (m.dt / substeps) * np.arange(substeps + 1)
    bps = [t for t in sig.breakpoints(t_k, t_k + m.dt)]
    if bps:
        merged = np.concatenate([edges, np.asarray(bps, dtype=float)])
        merged.sort()
        # Drop near-duplicates so degenerate segments never reach the stepper.
        keep = np.concatenate([[True], np.diff(merged) > 1e-12 * m.dt])
        edges = merged[keep]
        edges[-1] = t_k + m.dt

    def w_of(t: float) -> np.ndarray:
        w = np.zeros(2 * n)
        w[:n] = m.D @ sig.value(t)
        return w

    cache = zoh_cache if zoh_cache is not None else {}
    rec_t, rec_z = [], []
    for i in range(edges.size - 1):
        a, b = edges[i], edges[i + 1]
        if i % decimation == 0:
            rec_t.append(a)
            rec_z.append(z)
        h = b - a
        if sig.piecewise_constant:
            key = (stage, h)
            pair = cache.get(key)
            if pair is None:
                pair = _zoh_pair(M, h)
                cache[key] = pair
            Phi, Psi = pair
            z = Phi @ z + Psi @ w_of(0.5 * (a + b))
        else:
            z = _rk4_step(M, w_of, a, h, z)
    rec_t.append(edges[-1])
    rec_z.append(z)

    ts = np.asarray(rec_t)
    zs = np.asarray(rec_z)
    xs, xhats = zs[:, :n], zs[:, n:]
    if stage is Stage.STABILIZING:
        us = xhats @ m.K.T
    else:
        us = np.zeros((ts.size, m.n_u))
    return zs[-1, :n].copy(), zs[-1, n:].copy(), (ts, xs, xhats, us)


def run_closed_loop(m: PlantModel, p: DesignParams, d: DerivedConstants,
                    sig: Disturbance, x0, horizon: float,
                    substeps: int = DEFAULT_SUBSTEPS, decimation: int = 1) -> TrajectoryLog:
    """Run the full sampled protocol: encode, decode, reset, integrate,
    and propagate both codec states, logging everything.

    The encoder and decoder are advanced independently from the exchanged
    symbol; a lockstep divergence raises immediately.
    """
    x = as_vector(x0, "x0").copy()
    if x.size != m.n_x:
        raise ValueError("x0 dimension mismatch")
    if sig.dim != m.n_d:
        raise ValueError("disturbance dimension mismatch")
    if horizon < m.dt:
        raise ValueError("horizon must cover at least one sampling period")
    n_steps = int(np.floor(horizon / m.dt + 1e-9))

    enc = codec.initial_state(p.radius0, m.n_x)
    dec = codec.initial_state(p.radius0, m.n_x)

    samp_t, samp_x, samp_xhat = [], [], []
    samp_sym, samp_stage, samp_E, samp_center, samp_V, samp_dsup = [], [], [], [], [], []
    dense_t, dense_k, dense_x, dense_xhat, dense_u = [], [], [], [], []
    events: list[TrajectoryEvent] = []
    enc_states: list[CodecState] = []
    dec_states: list[CodecState] = []
    cache: dict = {}
    prev_visible: bool | None = None

    for k in range(n_steps + 1):
        t_k = k * m.dt
        sym = codec.encode(enc, x, m.n_levels)
        if sym >= 1:
            xhat = codec.decode_center(dec, sym, m.n_levels)
            stage = Stage.STABILIZING
        else:
            xhat = dec.center.copy()
            stage = Stage.SEARCHING

        visible = sym >= 1
        if prev_visible is not None and visible != prev_visible:
            events.append(TrajectoryEvent("captured" if visible else "escaped", k, t_k))
        prev_visible = visible

        samp_t.append(t_k)
        samp_x.append(x.copy())
        samp_xhat.append(xhat.copy())
        samp_sym.append(sym)
        samp_stage.append(1 if stage is Stage.STABILIZING else 0)
        samp_E.append(dec.radius)
        samp_center.append(dec.center.copy())
        samp_V.append(codec.quad_value(dec.center, dec.radius, d.P, p.rho))
        samp_dsup.append(sup_norm_on(sig, (k - 1) * m.dt, t_k) if k else 0.0)
        enc_states.append(enc)
        dec_states.append(dec)

        if k == n_steps:
            break

        x, _, (ts, xs, xhats, us) = step_interval(
            m, x, xhat, stage, sig, t_k, substeps, cache, decimation)
        dense_t.append(ts)
        dense_k.append(np.full(ts.size, k, dtype=int))
        dense_x.append(xs)
        dense_xhat.append(xhats)
        dense_u.append(us)

        enc = codec.advance(enc, sym, d, p)
        dec = codec.advance(dec, sym, d, p)
        if enc != dec:
            raise RuntimeError("encoder and decoder states diverged")

    return TrajectoryLog(
        t=np.asarray(samp_t),
        x=np.asarray(samp_x),
        xhat=np.asarray(samp_xhat),
        symbol=np.asarray(samp_sym, dtype=int),
        stage=np.asarray(samp_stage, dtype=int),
        radius=np.asarray(samp_E),
        center=np.asarray(samp_center),
        value=np.asarray(samp_V),
        d_sup_prev=np.asarray(samp_dsup),
        dense_t=np.concatenate(dense_t) if dense_t else np.empty(0),
        dense_k=np.concatenate(dense_k) if dense_k else np.empty(0, dtype=int),
        dense_x=np.concatenate(dense_x) if dense_x else np.empty((0, m.n_x)),
        dense_xhat=np.concatenate(dense_xhat) if dense_xhat else np.empty((0, m.n_x)),
        dense_u=np.concatenate(dense_u) if dense_u else np.empty((0, m.n_u)),
        events=events,
        enc_states=enc_states,
        dec_states=dec_states,
        x0=as_vector(x0).copy(),
        horizon=float(horizon),
        substeps=int(substeps),
    )
