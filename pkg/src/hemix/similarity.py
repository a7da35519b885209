"""Euclidean, hyperbolic, and mixed similarity over learned linear projections.

Features are row vectors; every projection is applied as f @ W. The hyperbolic
branch projects into spatial coordinates and lifts onto the hyperboloid, where
similarity is the Lorentzian inner product. The mixed score is the convex
combination (1 - alpha) * sim_e + alpha * sim_h.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .lorentz import CurvedPoint, apex, exp_map, lift, lorentz_inner, tangent_project

EMBED_LINEAR = "linear"
EMBED_EXPMAP = "expmap"

DEFAULT_DIM = 512
DEFAULT_TAU = 0.07
DEFAULT_KAPPA = 1.0


@dataclass
class ProjectionBundle:
    """The four projection matrices plus the mixing, temperature, and curvature scalars.

    alpha must lie strictly inside (0, 1) unless ``allow_endpoint_alpha`` is
    set; the endpoints reduce the mix to a single branch and are meant for
    diagnostics only. ``embed_strategy`` selects how the hyperbolic branch
    reaches the manifold: "linear" lifts the projected vector directly,
    "expmap" treats it as a tangent at the apex (ablation variant).
    """

    w_ev: np.ndarray
    w_et: np.ndarray
    w_hv: np.ndarray
    w_ht: np.ndarray
    alpha: float
    tau: float = DEFAULT_TAU
    kappa: float = DEFAULT_KAPPA
    embed_strategy: str = EMBED_LINEAR
    allow_endpoint_alpha: bool = field(default=False, compare=False)

    def __post_init__(self):
        for name in ("w_ev", "w_et", "w_hv", "w_ht"):
            m = np.asarray(getattr(self, name), dtype=np.float64)
            setattr(self, name, m)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError(f"{name} must be a square matrix, got shape {m.shape}")
            if m.shape != self.w_ev.shape:
                raise ValueError("all projection matrices must share one dimension")
            if not np.all(np.isfinite(m)):
                raise ValueError(f"{name} contains non-finite entries")
        if self.allow_endpoint_alpha:
            if not 0.0 <= self.alpha <= 1.0:
                raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        elif not 0.0 < self.alpha < 1.0:
            raise ValueError(
                f"alpha must be strictly inside (0, 1), got {self.alpha}; "
                "set allow_endpoint_alpha=True for single-branch diagnostics"
            )
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.kappa <= 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.embed_strategy not in (EMBED_LINEAR, EMBED_EXPMAP):
            raise ValueError(f"unknown embed strategy {self.embed_strategy!r}")

    @property
    def dim(self) -> int:
        return self.w_ev.shape[0]

    @classmethod
    def initialize(
        cls,
        dim: int = DEFAULT_DIM,
        alpha: float = 0.5,
        tau: float = DEFAULT_TAU,
        kappa: float = DEFAULT_KAPPA,
        seed: int = 42,
        embed_strategy: str = EMBED_LINEAR,
    ) -> "ProjectionBundle":
        """Seeded uniform init with gain 1/sqrt(dim), keeping initial scores O(1)."""
        rng = np.random.default_rng(seed)
        gain = 1.0 / math.sqrt(dim)
        mats = [rng.uniform(-gain, gain, size=(dim, dim)) for _ in range(4)]
        return cls(
            *mats,
            alpha=alpha,
            tau=tau,
            kappa=kappa,
            embed_strategy=embed_strategy,
            allow_endpoint_alpha=(alpha == 0.0 or alpha == 1.0),
        )


def _check_dim(f: np.ndarray, dim: int, what: str) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (dim,):
        raise ValueError(f"{what} must be a length-{dim} vector, got shape {f.shape}")
    return f


def sim_euclidean(f_v: np.ndarray, f_t: np.ndarray, bundle: ProjectionBundle) -> float:
    """<f_v @ W_EV, f_t @ W_ET>, the plain inner product of the projections."""
    f_v = _check_dim(f_v, bundle.dim, "visual feature")
    f_t = _check_dim(f_t, bundle.dim, "text feature")
    return float((f_v @ bundle.w_ev) @ (f_t @ bundle.w_et))


def hyperbolic_embed(
    f: np.ndarray, w: np.ndarray, kappa: float, strategy: str = EMBED_LINEAR
) -> CurvedPoint:
    """Project a feature and place it on the hyperboloid.

    "linear": z = f @ W becomes the spatial part, time is solved from the
    membership constraint. "expmap": z is read as a tangent at the apex and
    pushed along its geodesic instead.
    """
    f = np.asarray(f, dtype=np.float64)
    z = f @ np.asarray(w, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("projection produced non-finite coordinates")
    if strategy == EMBED_LINEAR:
        return lift(z, kappa)
    if strategy == EMBED_EXPMAP:
        base = apex(z.shape[0], kappa)
        return exp_map(base, tangent_project(base, np.concatenate(([0.0], z))))
    raise ValueError(f"unknown embed strategy {strategy!r}")


def sim_hyperbolic(f_v: np.ndarray, f_t: np.ndarray, bundle: ProjectionBundle) -> float:
    """Lorentzian inner product of the embedded pair; always <= -1/kappa."""
    f_v = _check_dim(f_v, bundle.dim, "visual feature")
    f_t = _check_dim(f_t, bundle.dim, "text feature")
    pv = hyperbolic_embed(f_v, bundle.w_hv, bundle.kappa, bundle.embed_strategy)
    pt = hyperbolic_embed(f_t, bundle.w_ht, bundle.kappa, bundle.embed_strategy)
    return lorentz_inner(pv.as_vector(), pt.as_vector())


def hemix(f_v: np.ndarray, f_t: np.ndarray, bundle: ProjectionBundle) -> float:
    """(1 - alpha) * sim_euclidean + alpha * sim_hyperbolic.

    The endpoints return the single-branch score itself, bit for bit.
    """
    if bundle.alpha == 0.0:
        return sim_euclidean(f_v, f_t, bundle)
    if bundle.alpha == 1.0:
        return sim_hyperbolic(f_v, f_t, bundle)
    return (1.0 - bundle.alpha) * sim_euclidean(f_v, f_t, bundle) + bundle.alpha * sim_hyperbolic(
        f_v, f_t, bundle
    )


# ---------------------------------------------------------------------------
# Weight file format: JSON with a header (dim, kappa, alpha, tau, layout) and
# the four matrices flattened row-major in fixed order, float64.
# ---------------------------------------------------------------------------

def save_bundle(bundle: ProjectionBundle, path: str | Path) -> None:
    payload = {
        "dim": bundle.dim,
        "kappa": bundle.kappa,
        "alpha": bundle.alpha,
        "tau": bundle.tau,
        "layout": "row-major",
        "embed_strategy": bundle.embed_strategy,
        "w_ev": bundle.w_ev.ravel().tolist(),
        "w_et": bundle.w_et.ravel().tolist(),
        "w_hv": bundle.w_hv.ravel().tolist(),
        "w_ht": bundle.w_ht.ravel().tolist(),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n")


def load_bundle(path: str | Path) -> ProjectionBundle:
    payload = json.loads(Path(path).read_text())
    if payload.get("layout") != "row-major":
        raise ValueError(f"unsupported weight layout {payload.get('layout')!r}")
    dim = int(payload["dim"])
    mats = {}
    for name in ("w_ev", "w_et", "w_hv", "w_ht"):
        flat = np.asarray(payload[name], dtype=np.float64)
        if flat.shape != (dim * dim,):
            raise ValueError(f"{name} has {flat.shape[0]} entries, expected {dim * dim}")
        mats[name] = flat.reshape(dim, dim)
    alpha = float(payload["alpha"])
    return ProjectionBundle(
        **mats,
        alpha=alpha,
        tau=float(payload["tau"]),
        kappa=float(payload["kappa"]),
        embed_strategy=payload.get("embed_strategy", EMBED_LINEAR),
        allow_endpoint_alpha=(alpha == 0.0 or alpha == 1.0),
    )
