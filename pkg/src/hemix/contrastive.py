"""Anchor-based contrastive objective over mixed similarity scores.

Each image contributes one softmax term set: its own positive anchor plus, by
default, every anchor of the other images (the other-image negatives). The
``intra_negatives`` switch additionally admits the image's own non-positive
anchors into the denominator; both policies are supported because the loss'
printed indicator and its prose description disagree, and downstream code
must be able to test either reading.

Gradients with respect to the four projection matrices are computed in closed
form. For a scored pair (a, t):

    sim_e           = (a W_EV) . (t W_ET)
    d sim_e / d W_EV = outer(a, t W_ET)
    d sim_e / d W_ET = outer(t, a W_EV)

    z_v = a W_HV, z_t = t W_HT, x0 = sqrt(||z||^2 + 1/kappa)
    sim_h            = -x0_v x0_t + z_v . z_t
    d sim_h / d z_v  = z_t - (x0_t / x0_v) z_v     (chain through W_HV)
    d sim_h / d z_t  = z_v - (x0_v / x0_t) z_t     (chain through W_HT)

and the softmax factor (p_k - 1[k is the positive]) / tau weights each pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lorentz import geodesic_distance
from .similarity import EMBED_LINEAR, ProjectionBundle, hyperbolic_embed


@dataclass
class ImageRecord:
    """Anchors of one image (index 0 is the positive) and its text feature."""

    anchors: list
    text: np.ndarray

    def __post_init__(self):
        if len(self.anchors) < 1:
            raise ValueError("an image record needs at least one anchor")
        self.anchors = [np.asarray(a, dtype=np.float64) for a in self.anchors]
        self.text = np.asarray(self.text, dtype=np.float64)
        dim = self.text.shape[0]
        if any(a.shape != (dim,) for a in self.anchors):
            raise ValueError("anchor and text feature dimensions differ")


@dataclass
class GroundingBatch:
    images: list

    def __post_init__(self):
        if len(self.images) == 0:
            raise ValueError("batch must contain at least one image")

    @property
    def dim(self) -> int:
        return self.images[0].text.shape[0]


@dataclass
class LossReport:
    loss: float
    grads: dict | None = field(default=None)

    def __post_init__(self):
        if not math.isfinite(self.loss) or self.loss < 0.0:
            raise ValueError(f"loss must be finite and nonnegative, got {self.loss}")
        if self.grads is not None:
            for name, g in self.grads.items():
                if not np.all(np.isfinite(g)):
                    raise ValueError(f"gradient {name} contains non-finite entries")


def contrastive_loss(
    batch: GroundingBatch,
    bundle: ProjectionBundle,
    intra_negatives: bool = False,
    *,
    score_offset: float = 0.0,
    compute_grads: bool = True,
) -> LossReport:
    """Mean over images of -log softmax(positive | term set), with analytic grads.

    ``score_offset`` is a test hook that adds a constant to every score in
    every term set; softmax shift invariance makes it a no-op on the loss.
    """
    if bundle.embed_strategy != EMBED_LINEAR:
        raise ValueError("contrastive gradients support the linear embed strategy only")
    n_img = len(batch.images)
    dim = batch.dim
    if dim != bundle.dim:
        raise ValueError(f"batch feature dim {dim} does not match bundle dim {bundle.dim}")
    alpha, tau, kappa = bundle.alpha, bundle.tau, bundle.kappa

    anchors = np.stack([a for img in batch.images for a in img.anchors])
    image_of = np.concatenate(
        [np.full(len(img.anchors), i) for i, img in enumerate(batch.images)]
    )
    rank_of = np.concatenate([np.arange(len(img.anchors)) for img in batch.images])
    offsets = np.concatenate(([0], np.cumsum([len(img.anchors) for img in batch.images])))

    ev = anchors @ bundle.w_ev
    zv = anchors @ bundle.w_hv
    x0v = np.sqrt(np.einsum("ij,ij->i", zv, zv) + 1.0 / kappa)

    g_ev = np.zeros_like(bundle.w_ev) if compute_grads else None
    g_et = np.zeros_like(bundle.w_et) if compute_grads else None
    g_hv = np.zeros_like(bundle.w_hv) if compute_grads else None
    g_ht = np.zeros_like(bundle.w_ht) if compute_grads else None

    total = 0.0
    for i, img in enumerate(batch.images):
        t = img.text
        if intra_negatives:
            sel = np.arange(anchors.shape[0])
        else:
            sel = np.flatnonzero((image_of != i) | (rank_of == 0))
        pos = int(np.searchsorted(sel, offsets[i]))

        et = t @ bundle.w_et
        zt = t @ bundle.w_ht
        x0t = math.sqrt(float(zt @ zt) + 1.0 / kappa)

        sim_e = ev[sel] @ et
        sim_h = -x0v[sel] * x0t + zv[sel] @ zt
        if alpha == 0.0:
            scores = sim_e
        elif alpha == 1.0:
            scores = sim_h
        else:
            scores = (1.0 - alpha) * sim_e + alpha * sim_h
        scores = (scores + score_offset) / tau

        m = float(np.max(scores))
        exps = np.exp(scores - m)
        denom = float(np.sum(exps))
        total += math.log(denom) - (scores[pos] - m)

        if compute_grads:
            gvec = exps / denom
            gvec[pos] -= 1.0
            gvec /= tau * n_img
            a_sel = anchors[sel]
            g_ev += (1.0 - alpha) * np.outer(a_sel.T @ gvec, et)
            g_et += (1.0 - alpha) * np.outer(t, ev[sel].T @ gvec)
            c = zt[None, :] - (x0t / x0v[sel])[:, None] * zv[sel]
            g_hv += alpha * (a_sel.T @ (gvec[:, None] * c))
            ht_dir = zv[sel].T @ gvec - (float(gvec @ x0v[sel]) / x0t) * zt
            g_ht += alpha * np.outer(t, ht_dir)

    loss = total / n_img
    if -1e-12 < loss < 0.0:
        # log(denom) can round a hair below the positive-term score when the
        # softmax is fully saturated; the true value is nonnegative.
        loss = 0.0
    grads = None
    if compute_grads:
        grads = {"w_ev": g_ev, "w_et": g_et, "w_hv": g_hv, "w_ht": g_ht}
    return LossReport(loss=loss, grads=grads)


def hierarchical_loss(
    f_cat: np.ndarray,
    f_base_ref: np.ndarray,
    f_ref: np.ndarray,
    bundle: ProjectionBundle,
) -> float:
    """Explicit hierarchy constraint: geodesic distances of category and
    decomposed phrase to the raw expression, all through the text projection."""
    f_cat = np.asarray(f_cat, dtype=np.float64)
    f_base_ref = np.asarray(f_base_ref, dtype=np.float64)
    f_ref = np.asarray(f_ref, dtype=np.float64)
    if not f_cat.shape == f_base_ref.shape == f_ref.shape:
        raise ValueError("hierarchy features must share one dimension")
    embed = lambda f: hyperbolic_embed(f, bundle.w_ht, bundle.kappa, bundle.embed_strategy)
    base = embed(f_base_ref)
    return geodesic_distance(embed(f_cat), base) + geodesic_distance(embed(f_ref), base)


def gradient_check(
    batch: GroundingBatch,
    bundle: ProjectionBundle,
    epsilon: float = 1e-5,
    intra_negatives: bool = False,
) -> float:
    """Max relative error of analytic grads vs central finite differences.

    The relative error denominator is max(|analytic|, |numeric|, 1e-8),
    evaluated over every entry of the four projection matrices.
    """
    if not 1e-6 <= epsilon <= 1e-4:
        raise ValueError(f"epsilon must lie in [1e-6, 1e-4], got {epsilon}")
    analytic = contrastive_loss(batch, bundle, intra_negatives).grads
    worst = 0.0
    for name in ("w_ev", "w_et", "w_hv", "w_ht"):
        mat = getattr(bundle, name)
        it = np.nditer(mat, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = mat[idx]
            mat[idx] = orig + epsilon
            up = contrastive_loss(batch, bundle, intra_negatives, compute_grads=False).loss
            mat[idx] = orig - epsilon
            down = contrastive_loss(batch, bundle, intra_negatives, compute_grads=False).loss
            mat[idx] = orig
            numeric = (up - down) / (2.0 * epsilon)
            a = float(analytic[name][idx])
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst
