"""Batched path simulation.

Paths are processed in fixed blocks of consecutive path indices.  Every
per-path result depends only on ``(master_seed, path_index, level)``, and
blocks write into preallocated slots, so the output is identical for any
thread count and any scheduling order.

The numba kernels reproduce the arithmetic of :func:`cireuler.schemes.cir_step`
and :func:`cireuler.logheston.logprice_step` operation for operation; the
``"python"`` backend runs those reference functions directly.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numba as nb
import numpy as np

from .logheston import joint_path
from .model import ModelParams
from .rng import STREAM_W, coarsen, coarsen_array, normal_block
from .schemes import SchemeSpec

__all__ = [
    "BLOCK_CELLS",
    "PAYOFF_KINDS",
    "coupled_terminal",
    "payoff_levels",
    "bm_discrete_max",
    "block_ranges",
]

# standard normals per stream and block; bounds memory at ~4 MB per stream
BLOCK_CELLS = 1 << 18

PAYOFF_KINDS = {"lookback": 0, "asian": 1, "terminal": 2}


@nb.njit(inline="always")
def _fix(code, x):
    if code == 0:
        return x
    if code == 1:
        return x if x > 0.0 else 0.0
    return abs(x)


@nb.njit(inline="always")
def _cir_next(c1, c2, c3, v, kappa, theta, sigma, dt, dw):
    return _fix(c1, v) + kappa * (theta - _fix(c2, v)) * dt + sigma * math.sqrt(_fix(c3, v)) * dw


@nb.njit(inline="always")
def _x_next(x, vh, mu, rho, dt, dw, db):
    return x + (mu - 0.5 * vh) * dt + math.sqrt(vh) * (rho * dw + math.sqrt(1.0 - rho * rho) * db)


@nb.njit(nogil=True, cache=True)
def _coupled_kernel(zw, zb, zwc, zbc, coupled, codes, params, out_vf, out_vc, out_xf, out_xc, out_neg):
    """Terminal values at levels 2n (fine) and n (coarse) for every
    (scheme, model, path).  ``params`` rows: v0, kappa, theta, sigma, rho, mu, x0, T."""
    n_paths, n_fine = zw.shape
    n = n_fine // 2
    for i in range(codes.shape[0]):
        c1, c2, c3 = codes[i, 0], codes[i, 1], codes[i, 2]
        for m in range(params.shape[0]):
            v0 = params[m, 0]
            kappa = params[m, 1]
            theta = params[m, 2]
            sigma = params[m, 3]
            rho = params[m, 4]
            mu = params[m, 5]
            x0 = params[m, 6]
            T = params[m, 7]
            dtf = T / n_fine
            dtc = T / n
            sf = math.sqrt(dtf)
            sc = math.sqrt(dtc)
            for p in range(n_paths):
                vf = v0
                vc = v0
                vhf = v0
                vhc = v0
                xf = x0
                xc = x0
                neg = False
                for j in range(n):
                    aw = sf * zw[p, 2 * j]
                    bw = sf * zw[p, 2 * j + 1]
                    ab = sf * zb[p, 2 * j]
                    bb = sf * zb[p, 2 * j + 1]
                    if coupled:
                        cw = aw + bw
                        cb = ab + bb
                    else:
                        cw = sc * zwc[p, j]
                        cb = sc * zbc[p, j]
                    # fine level, two steps
                    xf = _x_next(xf, vhf, mu, rho, dtf, aw, ab)
                    vf = _cir_next(c1, c2, c3, vf, kappa, theta, sigma, dtf, aw)
                    vhf = _fix(c3, vf)
                    neg |= vf < 0.0
                    xf = _x_next(xf, vhf, mu, rho, dtf, bw, bb)
                    vf = _cir_next(c1, c2, c3, vf, kappa, theta, sigma, dtf, bw)
                    vhf = _fix(c3, vf)
                    neg |= vf < 0.0
                    # coarse level, one step
                    xc = _x_next(xc, vhc, mu, rho, dtc, cw, cb)
                    vc = _cir_next(c1, c2, c3, vc, kappa, theta, sigma, dtc, cw)
                    vhc = _fix(c3, vc)
                    neg |= vc < 0.0
                out_vf[i, m, p] = vhf
                out_vc[i, m, p] = vhc
                out_xf[i, m, p] = xf
                out_xc[i, m, p] = xc
                out_neg[i, m, p] = neg


@nb.njit(nogil=True, cache=True)
def _payoff_kernel(dw, db, c1, c2, c3, prm, kind, strike, out):
    """Payoff of the piecewise-constant log-price path for each row of
    increments ``dw``/``db`` (already scaled to the grid step)."""
    n_paths, n = dw.shape
    v0 = prm[0]
    kappa = prm[1]
    theta = prm[2]
    sigma = prm[3]
    rho = prm[4]
    mu = prm[5]
    x0 = prm[6]
    T = prm[7]
    dt = T / n
    for p in range(n_paths):
        v = v0
        vh = v0
        x = x0
        smax = math.exp(x0)
        ssum = 0.0
        for k in range(n):
            ssum += math.exp(x)
            x = _x_next(x, vh, mu, rho, dt, dw[p, k], db[p, k])
            v = _cir_next(c1, c2, c3, v, kappa, theta, sigma, dt, dw[p, k])
            vh = _fix(c3, v)
            s = math.exp(x)
            if s > smax:
                smax = s
        if kind == 0:
            g = strike - smax
            out[p] = g if g > 0.0 else 0.0
        elif kind == 1:
            g = strike - ssum / n
            out[p] = g if g > 0.0 else 0.0
        else:
            out[p] = x


def _param_rows(models) -> np.ndarray:
    return np.array(
        [[p.v0, p.kappa, p.theta, p.sigma, p.rho, p.mu, p.x0, p.T] for p in models],
        dtype=np.float64,
    )


def block_ranges(M: int, level: int) -> list[tuple[int, int]]:
    size = max(1, min(M, BLOCK_CELLS // max(level, 1)))
    return [(lo, min(lo + size, M)) for lo in range(0, M, size)]


def _run_blocks(fn, blocks, threads: int) -> None:
    if threads <= 1 or len(blocks) <= 1:
        for lo, hi in blocks:
            fn(lo, hi)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for fut in [pool.submit(fn, lo, hi) for lo, hi in blocks]:
            fut.result()


def coupled_terminal(
    schemes: list[SchemeSpec],
    models: list[ModelParams],
    N: int,
    M: int,
    master_seed: int,
    *,
    threads: int = 1,
    coupled: bool = True,
    backend: str = "numba",
) -> dict[str, np.ndarray]:
    """Terminal values of (v_hat, x_hat) at levels ``N`` and ``2N``.

    Path ``i`` of the fine level is driven by the increments keyed on
    ``(master_seed, i, level=2N)``; the coarse level uses their pairwise
    sums.  With ``coupled=False`` the coarse level draws its own increments
    (keyed on level ``N``) instead, which breaks the coupling.

    Returns arrays of shape ``(len(schemes), len(models), M)`` under keys
    ``v_fine, v_coarse, x_fine, x_coarse`` and the boolean ``negative``
    (the pre-fix variance dipped below zero at either level).
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    shape = (len(schemes), len(models), M)
    out = {k: np.empty(shape) for k in ("v_fine", "v_coarse", "x_fine", "x_coarse")}
    out["negative"] = np.zeros(shape, dtype=np.bool_)
    if backend == "python":
        _coupled_python(schemes, models, N, M, master_seed, coupled, out)
        return out
    if backend != "numba":
        raise ValueError(f"unknown backend {backend!r}")
    codes = np.array([s.codes for s in schemes], dtype=np.int64).reshape(len(schemes), 3)
    params = _param_rows(models)

    def work(lo, hi):
        paths = range(lo, hi)
        zw, zb = normal_block(master_seed, paths, 2 * N)
        if coupled:
            zwc = zbc = np.empty((0, 0))
        else:
            zwc, zbc = normal_block(master_seed, paths, N)
        views = [out[k][:, :, lo:hi] for k in ("v_fine", "v_coarse", "x_fine", "x_coarse", "negative")]
        tmp = [np.empty((len(schemes), len(models), hi - lo), dtype=v.dtype) for v in views]
        _coupled_kernel(zw, zb, zwc, zbc, coupled, codes, params, *tmp)
        for view, t in zip(views, tmp):
            view[...] = t

    _run_blocks(work, block_ranges(M, 2 * N), threads)
    return out


def _coupled_python(schemes, models, N, M, master_seed, coupled, out):
    from .rng import SeedSpec, gaussian_increments

    for m, p in enumerate(models):
        for i in range(M):
            fine = gaussian_increments(SeedSpec(master_seed, i), 2 * N, p.T)
            coarse = coarsen(fine) if coupled else gaussian_increments(SeedSpec(master_seed, i), N, p.T)
            for s_idx, s in enumerate(schemes):
                jf = joint_path(s, p, fine)
                jc = joint_path(s, p, coarse)
                out["v_fine"][s_idx, m, i] = jf.v_hat[-1]
                out["v_coarse"][s_idx, m, i] = jc.v_hat[-1]
                out["x_fine"][s_idx, m, i] = jf.x_hat[-1]
                out["x_coarse"][s_idx, m, i] = jc.x_hat[-1]
                out["negative"][s_idx, m, i] = jf.cir.went_negative or jc.cir.went_negative


def payoff_levels(
    scheme: SchemeSpec,
    model: ModelParams,
    kind: str,
    strike: float,
    levels: list[int],
    ref_level: int,
    M: int,
    master_seed: int,
    *,
    threads: int = 1,
) -> np.ndarray:
    """Payoff values, shape ``(len(levels), M)``, with every level obtained
    by repeated coarsening of one grid per path at ``ref_level``."""
    code = PAYOFF_KINDS[kind]
    for lev in levels:
        if lev < 1 or ref_level % lev or (ref_level // lev) & (ref_level // lev - 1):
            raise ValueError(f"level {lev} is not ref_level / 2^j for ref_level={ref_level}")
    prm = _param_rows([model])[0]
    c1, c2, c3 = scheme.codes
    out = np.empty((len(levels), M))
    sdt = math.sqrt(model.T / ref_level)
    wanted = sorted(set(levels), reverse=True)

    def work(lo, hi):
        zw, zb = normal_block(master_seed, range(lo, hi), ref_level)
        dw = sdt * zw
        db = sdt * zb
        level = ref_level
        values = {}
        for lev in wanted:
            while level > lev:
                dw = coarsen_array(dw)
                db = coarsen_array(db)
                level //= 2
            buf = np.empty(hi - lo)
            _payoff_kernel(dw, db, c1, c2, c3, prm, code, float(strike), buf)
            values[lev] = buf
        for row, lev in enumerate(levels):
            out[row, lo:hi] = values[lev]

    _run_blocks(work, block_ranges(M, ref_level), threads)
    return out


def bm_discrete_max(N: int, M: int, master_seed: int, *, T: float = 1.0, threads: int = 1) -> np.ndarray:
    """``max(0, W_{t_1}, ..., W_{t_N})`` for ``M`` Brownian paths on [0, T]."""
    if N < 1:
        raise ValueError("N must be at least 1")
    out = np.empty(M)
    sdt = math.sqrt(T / N)

    def work(lo, hi):
        (zw,) = normal_block(master_seed, range(lo, hi), N, streams=(STREAM_W,))
        w = np.cumsum(sdt * zw, axis=1)
        out[lo:hi] = np.maximum(w.max(axis=1), 0.0)

    _run_blocks(work, block_ranges(M, N), threads)
    return out

