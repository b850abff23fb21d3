"""Film-characteristic intensity transforms and least-squares fitting.

Maps attenuation line integrals to 8-bit film-like gray values through a
general sigmoid curve, with a piecewise low-range variant that zeroes the
air background and lifts faint soft tissue before joining the main curve.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from . import fileio
from ._util import round_half_away, to_gray8
from .projector import IntegralImage


@dataclass(frozen=True)
class SigmoidParams:
    """General sigmoid curve c1 + (255-c1-c2) * sigmoid(s*(g-t))."""

    c1: float = 40.0
    c2: float = 5.0
    t: float = 2.6
    s: float = 1.5

    def __post_init__(self):
        # builtin floats so repr() round-trips in parameter files
        for name in ("c1", "c2", "t", "s"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("c1 and c2 must be non-negative")
        if self.c1 + self.c2 >= 255:
            raise ValueError("require c1 + c2 < 255")
        if self.s <= 0:
            raise ValueError("slope scale s must be positive")


@dataclass(frozen=True)
class ModifiedSigmoidParams:
    """Piecewise curve: 0 below tau1, low-range sigmoid on [tau1, tau2],
    the base curve above tau2.

    ``c4 = None`` selects the continuity-derived span (see derive_c4); pass
    an explicit value to override.
    """

    base: SigmoidParams = field(default_factory=SigmoidParams)
    c3: float = 18.0
    c4: float | None = None
    tau1: float = 0.1
    tau2: float = 1.2

    def __post_init__(self):
        for name in ("c3", "tau1", "tau2"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.c4 is not None:
            object.__setattr__(self, "c4", float(self.c4))
        if not 0 <= self.tau1 < self.tau2:
            raise ValueError("require 0 <= tau1 < tau2")
        if self.c3 < 0:
            raise ValueError("c3 must be non-negative")

    def resolved_c4(self) -> float:
        return derive_c4(self) if self.c4 is None else float(self.c4)


@dataclass(frozen=True)
class Cephalogram8:
    """8-bit grayscale cephalogram with pixel spacing in mm."""

    data: np.ndarray
    spacing: tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        data = np.ascontiguousarray(self.data)
        if data.ndim != 2 or data.dtype != np.uint8:
            raise ValueError("cephalogram data must be a 2-D uint8 array")
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 2 or any(s <= 0 for s in spacing):
            raise ValueError(f"spacing must be 2 positive values, got {spacing}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", spacing)

    @property
    def dims(self) -> tuple[int, int]:
        return self.data.shape


def sigmoid(x):
    """Standard logistic function 1/(1+e^-x)."""
    return expit(np.asarray(x, dtype=np.float64)) if np.ndim(x) else float(expit(x))


def _curve(g: np.ndarray, p: SigmoidParams) -> np.ndarray:
    return p.c1 + (255.0 - p.c1 - p.c2) * expit(p.s * (g - p.t))


def _integrals(g) -> tuple[np.ndarray, tuple[float, float]]:
    if isinstance(g, IntegralImage):
        return g.data, g.spacing
    arr = np.asarray(g, dtype=np.float64)
    return arr, (0.5, 0.5)


def sigmoid_transform(g, p: SigmoidParams = SigmoidParams()) -> Cephalogram8:
    """Map integrals through the general sigmoid curve to 8-bit gray.

    Accepts an IntegralImage or a plain array; rounding is half away from
    zero, so the output range is [c1, 255-c2] up to rounding.
    """
    arr, spacing = _integrals(g)
    return Cephalogram8(to_gray8(_curve(arr, p)), spacing)


def derive_c4(p: ModifiedSigmoidParams) -> float:
    """Low-range span that makes the piecewise curve continuous at tau2.

    Solves c3 + c4*sigmoid((tau2-tau1)/2) = curve(tau2); with the default
    parameter set this evaluates to about 70.8.
    """
    g_tau2 = float(_curve(np.float64(p.tau2), p.base))
    if g_tau2 < p.c3:
        raise ValueError(
            f"curve({p.tau2}) = {g_tau2:.3f} is below c3 = {p.c3}; "
            "continuity would need a negative span"
        )
    return (g_tau2 - p.c3) * (1.0 + np.exp(-(p.tau2 - p.tau1) / 2.0))


def modified_sigmoid_transform(
    g, p: ModifiedSigmoidParams = ModifiedSigmoidParams()
) -> Cephalogram8:
    """Piecewise film transform: air zeroed, low range lifted, bone on the
    base curve.

    g < tau1 -> 0; tau1 <= g <= tau2 -> c3 + c4*sigmoid(g - (tau1+tau2)/2);
    g > tau2 -> base curve.
    """
    arr, spacing = _integrals(g)
    c4 = p.resolved_c4()
    mid = (p.tau1 + p.tau2) / 2.0
    low = p.c3 + c4 * expit(arr - mid)
    out = np.where(arr < p.tau1, 0.0, np.where(arr <= p.tau2, low, _curve(arr, p.base)))
    return Cephalogram8(to_gray8(out), spacing)


@dataclass(frozen=True)
class SigmoidFit:
    params: SigmoidParams
    rms: float
    converged: bool
    iterations: int


def fit_sigmoid(
    samples,
    init: SigmoidParams | None = None,
    max_iter: int = 200,
) -> SigmoidFit:
    """Fit (c1, c2, t, s) to (integral, gray) samples by damped least squares.

    Levenberg-Marquardt with an analytic Jacobian: damping starts at 1e-3
    and moves x10 on a rejected step, /10 on an accepted one; stops when the
    relative cost change drops below 1e-10.  On non-convergence the best
    parameters so far are returned with ``converged=False``.
    """
    pts = np.asarray(samples, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 4:
        raise ValueError("need at least 4 (integral, gray) sample pairs")
    x, y = pts[:, 0], pts[:, 1]
    if (x < 0).any():
        raise ValueError("integrals must be non-negative")
    if (y < 0).any() or (y > 255).any():
        raise ValueError("gray values must lie in [0, 255]")

    if init is None:
        theta = np.array([float(y.min()), float(255.0 - y.max()), float(np.median(x)), 1.0])
    else:
        theta = np.array([init.c1, init.c2, init.t, init.s])

    def valid(th):
        c1, c2, _, s = th
        return c1 >= 0 and c2 >= 0 and c1 + c2 < 255 and s > 0

    def residual(th):
        c1, c2, t, s = th
        amp = 255.0 - c1 - c2
        u = expit(s * (x - t))
        return (c1 + amp * u) - y, u, amp

    if not valid(theta):
        theta = np.array([40.0, 5.0, float(np.median(x)), 1.0])

    r, u, amp = residual(theta)
    cost = float(r @ r)
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        s_cur, t_cur = theta[3], theta[2]
        du = u * (1.0 - u)
        jac = np.stack(
            [1.0 - u, -u, -amp * du * s_cur, amp * du * (x - t_cur)], axis=1
        )
        jtj = jac.T @ jac
        jtr = jac.T @ r
        accepted = False
        for _ in range(12):
            damp = jtj + lam * np.diag(np.maximum(np.diag(jtj), 1e-12))
            try:
                delta = np.linalg.solve(damp, -jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand = theta + delta
            if valid(cand):
                r_new, u_new, amp_new = residual(cand)
                cost_new = float(r_new @ r_new)
                if cost_new <= cost:
                    rel = abs(cost - cost_new) / max(cost, 1e-30)
                    theta, r, u, amp, cost = cand, r_new, u_new, amp_new, cost_new
                    lam = max(lam / 10.0, 1e-12)
                    accepted = True
                    if rel < 1e-10:
                        converged = True
                    break
            lam *= 10.0
        if converged or not accepted:
            converged = converged or not accepted and cost < 1e-20
            break

    params = SigmoidParams(c1=theta[0], c2=theta[1], t=theta[2], s=theta[3])
    rms = float(np.sqrt(cost / len(x)))
    return SigmoidFit(params=params, rms=rms, converged=converged, iterations=it)


# ---------------------------------------------------------------------------
# serialization


def save_cephalogram(c: Cephalogram8, path) -> Path:
    """Write the 8-bit image (PNG, PGM fallback) plus its sidecar."""
    image_path = fileio.save_gray8(path, c.data)
    nu, nv = c.dims
    fileio.write_keyvalues(
        image_path.with_suffix(".meta"),
        {"dims": f"{nu},{nv}", "spacing_mm": "{:.9g},{:.9g}".format(*c.spacing)},
    )
    return image_path


def load_cephalogram(path) -> Cephalogram8:
    arr = fileio.load_image8(path)
    if arr.ndim != 2:
        raise ValueError(f"{path}: expected a grayscale image")
    meta_path = Path(path).with_suffix(".meta")
    spacing = (0.5, 0.5)
    if meta_path.exists():
        meta = fileio.read_keyvalues(meta_path)
        if "spacing_mm" in meta:
            spacing = fileio.parse_floats(meta["spacing_mm"], 2, "spacing_mm")
    return Cephalogram8(arr, spacing)


def save_film_params(p: SigmoidParams | ModifiedSigmoidParams, path) -> Path:
    if isinstance(p, ModifiedSigmoidParams):
        items = {
            "c1": repr(p.base.c1), "c2": repr(p.base.c2),
            "t": repr(p.base.t), "s": repr(p.base.s),
            "c3": repr(p.c3),
            "c4": "derived" if p.c4 is None else repr(p.c4),
            "tau1": repr(p.tau1), "tau2": repr(p.tau2),
        }
    else:
        items = {"c1": repr(p.c1), "c2": repr(p.c2), "t": repr(p.t), "s": repr(p.s)}
    return fileio.write_keyvalues(path, items)


def load_film_params(path) -> SigmoidParams | ModifiedSigmoidParams:
    """Read a key=value parameter file; returns the modified variant when
    any low-range key (c3, c4, tau1, tau2) is present."""
    meta = fileio.read_keyvalues(path)
    base = SigmoidParams(
        c1=float(meta.get("c1", 40.0)), c2=float(meta.get("c2", 5.0)),
        t=float(meta.get("t", 2.6)), s=float(meta.get("s", 1.5)),
    )
    if not any(k in meta for k in ("c3", "c4", "tau1", "tau2")):
        return base
    c4_raw = meta.get("c4", "derived")
    return ModifiedSigmoidParams(
        base=base,
        c3=float(meta.get("c3", 18.0)),
        c4=None if c4_raw == "derived" else float(c4_raw),
        tau1=float(meta.get("tau1", 0.1)),
        tau2=float(meta.get("tau2", 1.2)),
    )
