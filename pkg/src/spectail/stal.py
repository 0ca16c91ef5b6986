"""Two-branch toy detector with tail-aware auxiliary supervision.

A small, fully affine model trained with plain gradient descent:

* spatial branch — pixel-summary encoder (256 -> 32), a projection head
  (32 -> 16) used only by the auxiliary losses, and a scalar classifier;
* frequency branch — feature encoder (74 -> 16), a tail embedding over the
  four tail-related feature slots, and two scalar classifiers.

During training the frequency branch acts as a teacher: its normalized
embedding is the alignment target for the spatial projection head, with the
target treated as a constant (no gradient flows into the teacher through the
alignment term).  An auxiliary-loss weight follows a warmup/plateau/cosine
schedule and reaches zero well before training ends.  At inference only the
spatial encoder and classifier are used; the frequency branch is dead weight
that can be zeroed without changing a single prediction.

Everything is numpy; gradients are hand-derived and checked against central
finite differences in the test suite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigError, DataError, DecodeError, DomainError, MetricError, NumericError
from .features import FEATURE_LENGTH, TAIL_SLICE

POOL_GRID = 16  # pixel summary is a POOL_GRID x POOL_GRID block-mean grid
SUMMARY_LEN = POOL_GRID * POOL_GRID
EMBED_DIM = 32
PROJ_DIM = 16
LN_EPS = 1e-6


# --- pixel summaries ----------------------------------------------------------

def pixel_summary(plane: np.ndarray) -> np.ndarray:
    """Flattened 16x16 block-mean summary of an intensity plane.

    Values are scaled to [0, 1] and centered so the uniform mid-gray plane
    maps to the zero vector; without the centering the shared gray level
    dominates the encoder's input and plain gradient descent conditions
    terribly.  The plane must be square with side divisible by 16 and hold
    values in the usual [0, 255] intensity range.
    """
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2 or plane.shape[0] != plane.shape[1]:
        raise DomainError(f"plane must be square, got shape {plane.shape}")
    n = plane.shape[0]
    if n % POOL_GRID != 0:
        raise DomainError(f"side must be divisible by {POOL_GRID}, got {n}")
    b = n // POOL_GRID
    pooled = plane.reshape(POOL_GRID, b, POOL_GRID, b).mean(axis=(1, 3))
    return pooled.reshape(SUMMARY_LEN) / 255.0 - 0.5


# --- model --------------------------------------------------------------------

@dataclass
class ToyStalModel:
    """All parameters of the two-branch detector (arrays mutate during training)."""

    pixel_encoder_w: np.ndarray  # (32, 256)
    pixel_encoder_b: np.ndarray  # (32,)
    proj_w: np.ndarray           # (16, 32)
    proj_b: np.ndarray           # (16,)
    spatial_cls_w: np.ndarray    # (32,)
    spatial_cls_b: float
    freq_encoder_w: np.ndarray   # (16, feature_dim)
    freq_encoder_b: np.ndarray   # (16,)
    tail_embed_w: np.ndarray     # (16, 4)
    tail_embed_b: np.ndarray     # (16,)
    tail_cls_w: np.ndarray       # (4,)
    tail_cls_b: float
    freq_cls_w: np.ndarray       # (16,)
    freq_cls_b: float
    beta: float = 0.5

    @classmethod
    def init(cls, seed: int, beta: float = 0.5, feature_dim: int = FEATURE_LENGTH) -> "ToyStalModel":
        """Seeded initialization: weights ~ N(0, 1/fan_in), biases zero.

        Draw order is fixed (field order above), so a seed pins every value.
        """
        rng = np.random.default_rng(seed)
        tail_dim = TAIL_SLICE.stop - TAIL_SLICE.start

        def w(out_dim, in_dim):
            return rng.normal(0.0, 1.0 / np.sqrt(in_dim), size=(out_dim, in_dim))

        return cls(
            pixel_encoder_w=w(EMBED_DIM, SUMMARY_LEN),
            pixel_encoder_b=np.zeros(EMBED_DIM),
            proj_w=w(PROJ_DIM, EMBED_DIM),
            proj_b=np.zeros(PROJ_DIM),
            spatial_cls_w=w(1, EMBED_DIM)[0],
            spatial_cls_b=0.0,
            freq_encoder_w=w(PROJ_DIM, feature_dim),
            freq_encoder_b=np.zeros(PROJ_DIM),
            tail_embed_w=w(PROJ_DIM, tail_dim),
            tail_embed_b=np.zeros(PROJ_DIM),
            tail_cls_w=w(1, tail_dim)[0],
            tail_cls_b=0.0,
            freq_cls_w=w(1, PROJ_DIM)[0],
            freq_cls_b=0.0,
            beta=beta,
        )

    def param_names(self) -> tuple[str, ...]:
        return PARAM_NAMES

    def copy(self) -> "ToyStalModel":
        kwargs = {}
        for f in fields(self):
            v = getattr(self, f.name)
            kwargs[f.name] = v.copy() if isinstance(v, np.ndarray) else v
        return ToyStalModel(**kwargs)

    def spatial_submodel(self) -> "SpatialSubmodel":
        """The inference-time model: pixel encoder and spatial classifier only."""
        return SpatialSubmodel(
            encoder_w=self.pixel_encoder_w.copy(),
            encoder_b=self.pixel_encoder_b.copy(),
            cls_w=self.spatial_cls_w.copy(),
            cls_b=float(self.spatial_cls_b),
        )

    def with_zeroed_frequency_branch(self) -> "ToyStalModel":
        """Copy with every frequency-branch parameter set to zero."""
        out = self.copy()
        for name in FREQ_PARAMS:
            v = getattr(out, name)
            setattr(out, name, np.zeros_like(v) if isinstance(v, np.ndarray) else 0.0)
        return out


PARAM_NAMES = (
    "pixel_encoder_w",
    "pixel_encoder_b",
    "proj_w",
    "proj_b",
    "spatial_cls_w",
    "spatial_cls_b",
    "freq_encoder_w",
    "freq_encoder_b",
    "tail_embed_w",
    "tail_embed_b",
    "tail_cls_w",
    "tail_cls_b",
    "freq_cls_w",
    "freq_cls_b",
)
SPATIAL_PARAMS = PARAM_NAMES[:6]
FREQ_PARAMS = PARAM_NAMES[6:]
# Parameters that reach the alignment loss only through the (constant) teacher
# target; the alignment gradient w.r.t. these must vanish identically.
TEACHER_PARAMS = ("freq_encoder_w", "freq_encoder_b", "tail_embed_w", "tail_embed_b")


@dataclass(frozen=True)
class SpatialSubmodel:
    encoder_w: np.ndarray
    encoder_b: np.ndarray
    cls_w: np.ndarray
    cls_b: float


# --- elementary pieces ----------------------------------------------------------

def sigmoid(z):
    arr = np.asarray(z, dtype=np.float64)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ez = np.exp(arr[~pos])
    out[~pos] = ez / (1.0 + ez)
    return float(out[0]) if scalar else out


def bce(logit: float, label: int) -> float:
    """Numerically stable binary cross-entropy of sigmoid(logit) against label."""
    z = float(logit)
    if not np.isfinite(z):
        raise NumericError("logit must be finite")
    y = float(label)
    return max(z, 0.0) - z * y + np.log1p(np.exp(-abs(z)))


def _bce_mean(logits: np.ndarray, labels: np.ndarray) -> float:
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise NumericError("logit must be finite")
    return float(np.mean(np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))))


def layer_norm(u: np.ndarray, eps: float = LN_EPS) -> np.ndarray:
    """Per-row standardization to zero mean / unit variance (no learned affine)."""
    u = np.asarray(u, dtype=np.float64)
    mean = u.mean(axis=-1, keepdims=True)
    var = u.var(axis=-1, keepdims=True)
    return (u - mean) / np.sqrt(var + eps)


def teacher_targets(model: ToyStalModel, feats: np.ndarray) -> np.ndarray:
    """Alignment targets: normalized frequency embedding with tail injection.

    The four tail-related feature slots feed a separate embedding that is
    scaled by the fusion strength (beta) and added to the feature-encoder
    output before normalization.
    """
    feats = np.atleast_2d(np.asarray(feats, dtype=np.float64))
    h = feats @ model.freq_encoder_w.T + model.freq_encoder_b
    e = feats[:, TAIL_SLICE] @ model.tail_embed_w.T + model.tail_embed_b
    return layer_norm(h + model.beta * e)


def curriculum_weight(step: int, sched: "CurriculumSchedule") -> float:
    """Auxiliary-loss weight at a training step: warmup, plateau, cosine anneal."""
    t = sched.total_steps
    if not 0 <= step <= t:
        raise DomainError(f"step {step} outside [0, {t}]")
    plateau_end = sched.plateau_end_frac * t
    anneal_end = sched.anneal_end_frac * t
    if step < sched.warmup_steps:
        return step / sched.warmup_steps
    if step <= plateau_end:
        return 1.0
    if step >= anneal_end:
        return 0.0
    return 0.5 * (1.0 + np.cos(np.pi * (step - plateau_end) / (anneal_end - plateau_end)))


@dataclass(frozen=True)
class CurriculumSchedule:
    total_steps: int
    warmup_steps: int = 800
    plateau_end_frac: float = 0.15
    anneal_end_frac: float = 0.45

    def __post_init__(self) -> None:
        if self.total_steps < 1:
            raise ConfigError("total_steps must be >= 1")
        if self.warmup_steps <= 0:
            raise ConfigError("warmup_steps must be positive")
        if not 0.0 < self.plateau_end_frac < self.anneal_end_frac <= 1.0:
            raise ConfigError("need 0 < plateau_end_frac < anneal_end_frac <= 1")
        if self.warmup_steps >= self.plateau_end_frac * self.total_steps:
            raise ConfigError(
                f"warmup ({self.warmup_steps} steps) extends past the plateau end "
                f"({self.plateau_end_frac * self.total_steps:.0f} steps)"
            )


@dataclass(frozen=True)
class LossWeights:
    lambda_cls: float = 1.0
    lambda_con: float = 0.1
    lambda_freq: float = 0.5
    lambda_align: float = 1.0
    lambda_tail: float = 0.5
    temperature: float = 0.1  # contrastive temperature

    def __post_init__(self) -> None:
        lams = (self.lambda_cls, self.lambda_con, self.lambda_freq,
                self.lambda_align, self.lambda_tail)
        if any(l < 0 for l in lams):
            raise ConfigError("loss weights must be nonnegative")
        if self.temperature <= 0:
            raise ConfigError("temperature must be positive")


# --- loss terms -----------------------------------------------------------------

def align_loss(proj: np.ndarray, targets: np.ndarray, labels: np.ndarray) -> float | None:
    """Class-balanced mean of (1 - cosine) between projections and fixed targets.

    Targets are constants here by construction: callers pass them in as data,
    so no gradient can reach whatever produced them.  Returns None (skip) on a
    single-class batch.
    """
    proj = np.atleast_2d(np.asarray(proj, dtype=np.float64))
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if classes.size < 2:
        return None
    pn = np.linalg.norm(proj, axis=1)
    tn = np.linalg.norm(targets, axis=1)
    if np.any(pn == 0.0) or np.any(tn == 0.0):
        raise NumericError("zero-norm vector in alignment loss")
    cos = np.sum(proj * targets, axis=1) / (pn * tn)
    total = 0.0
    for c in (0, 1):
        total += 0.5 * float(np.mean(1.0 - cos[labels == c]))
    return total


def supcon_loss(embeddings: np.ndarray, labels: np.ndarray, temperature: float = 0.1) -> float | None:
    """Supervised contrastive loss over L2-normalized embeddings.

    Every sample acts as an anchor; positives are the other samples with the
    same label.  Anchors without positives are dropped; if none remain the
    term is skipped (None).
    """
    emb = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    labels = np.asarray(labels)
    n = emb.shape[0]
    if n < 2:
        return None
    norms = np.linalg.norm(emb, axis=1)
    if np.any(norms == 0.0):
        raise NumericError("zero-norm embedding in contrastive loss")
    u = emb / norms[:, None]
    sims = (u @ u.T) / temperature
    same = labels[:, None] == labels[None, :]
    off_diag = ~np.eye(n, dtype=bool)
    pos = same & off_diag
    pos_counts = pos.sum(axis=1)
    anchors = pos_counts > 0
    if not np.any(anchors):
        return None
    # log-sum-exp over non-self candidates, stabilized per row
    masked = np.where(off_diag, sims, -np.inf)
    row_max = masked.max(axis=1)
    exp = np.where(off_diag, np.exp(sims - row_max[:, None]), 0.0)
    log_z = row_max + np.log(exp.sum(axis=1))
    log_prob = sims - log_z[:, None]
    per_anchor = -(log_prob * pos).sum(axis=1)[anchors] / pos_counts[anchors]
    return float(per_anchor.mean())


@dataclass(frozen=True)
class LossBreakdown:
    """Per-term values of one objective evaluation; skipped terms are None."""

    total: float
    w_aux: float
    cls_loss: float
    con_loss: float | None
    freq_loss: float
    align_loss: float | None
    tail_loss: float
    skipped: tuple[str, ...] = ()


def _forward(model: ToyStalModel, pixels: np.ndarray, feats: np.ndarray):
    v = pixels @ model.pixel_encoder_w.T + model.pixel_encoder_b
    proj = v @ model.proj_w.T + model.proj_b
    z_spatial = v @ model.spatial_cls_w + model.spatial_cls_b
    h = feats @ model.freq_encoder_w.T + model.freq_encoder_b
    tail_feats = feats[:, TAIL_SLICE]
    z_tail = tail_feats @ model.tail_cls_w + model.tail_cls_b
    z_freq = h @ model.freq_cls_w + model.freq_cls_b
    return v, proj, z_spatial, h, tail_feats, z_tail, z_freq


def total_loss(
    model: ToyStalModel,
    pixels: np.ndarray,
    feats: np.ndarray,
    labels: np.ndarray,
    weights: LossWeights,
    sched: CurriculumSchedule,
    step: int,
    teacher: np.ndarray | None = None,
) -> LossBreakdown:
    """Full objective: classification + contrastive, plus scheduled auxiliaries.

    ``teacher`` overrides the alignment targets; by default they are computed
    from the current model and, either way, treated as constants.
    """
    breakdown, _ = _loss_and_grads(
        model, pixels, feats, labels, weights, sched, step, teacher, want_grads=False
    )
    return breakdown


def grad_total_loss(
    model: ToyStalModel,
    pixels: np.ndarray,
    feats: np.ndarray,
    labels: np.ndarray,
    weights: LossWeights,
    sched: CurriculumSchedule,
    step: int,
    teacher: np.ndarray | None = None,
) -> tuple[LossBreakdown, dict]:
    """Objective value plus analytic gradients for every parameter."""
    return _loss_and_grads(
        model, pixels, feats, labels, weights, sched, step, teacher, want_grads=True
    )


def _loss_and_grads(model, pixels, feats, labels, weights, sched, step, teacher, want_grads):
    pixels = np.atleast_2d(np.asarray(pixels, dtype=np.float64))
    feats = np.atleast_2d(np.asarray(feats, dtype=np.float64))
    labels = np.asarray(labels)
    y = labels.astype(np.float64)
    n = pixels.shape[0]
    if feats.shape[0] != n or labels.shape[0] != n:
        raise DataError("pixels, features, labels must agree in length")

    w_aux = curriculum_weight(step, sched)
    v, proj, z_spatial, h, tail_feats, z_tail, z_freq = _forward(model, pixels, feats)
    if teacher is None:
        targets = teacher_targets(model, feats)
    else:
        targets = np.atleast_2d(np.asarray(teacher, dtype=np.float64))

    l_cls = _bce_mean(z_spatial, y)
    l_freq = _bce_mean(z_freq, y)
    l_tail = _bce_mean(z_tail, y)
    l_con = supcon_loss(proj, labels, weights.temperature)
    l_align = align_loss(proj, targets, labels)

    skipped = tuple(
        name for name, val in (("con", l_con), ("align", l_align)) if val is None
    )
    total = weights.lambda_cls * l_cls + w_aux * (
        weights.lambda_freq * l_freq + weights.lambda_tail * l_tail
    )
    if l_con is not None:
        total += weights.lambda_con * l_con
    if l_align is not None:
        total += w_aux * weights.lambda_align * l_align

    breakdown = LossBreakdown(
        total=float(total),
        w_aux=float(w_aux),
        cls_loss=l_cls,
        con_loss=l_con,
        freq_loss=l_freq,
        align_loss=l_align,
        tail_loss=l_tail,
        skipped=skipped,
    )
    if not want_grads:
        return breakdown, None

    grads: dict[str, np.ndarray | float] = {}

    # spatial classification
    dz_s = weights.lambda_cls * (sigmoid(z_spatial) - y) / n
    grads["spatial_cls_w"] = v.T @ dz_s
    grads["spatial_cls_b"] = float(dz_s.sum())
    dv = np.outer(dz_s, model.spatial_cls_w)

    # frequency-branch classifiers (scheduled)
    dz_f = w_aux * weights.lambda_freq * (sigmoid(z_freq) - y) / n
    grads["freq_cls_w"] = h.T @ dz_f
    grads["freq_cls_b"] = float(dz_f.sum())
    dh = np.outer(dz_f, model.freq_cls_w)
    grads["freq_encoder_w"] = dh.T @ feats
    grads["freq_encoder_b"] = dh.sum(axis=0)

    dz_t = w_aux * weights.lambda_tail * (sigmoid(z_tail) - y) / n
    grads["tail_cls_w"] = tail_feats.T @ dz_t
    grads["tail_cls_b"] = float(dz_t.sum())
    # The tail embedding feeds only the (constant) teacher target, so its
    # gradient is identically zero.
    grads["tail_embed_w"] = np.zeros_like(model.tail_embed_w)
    grads["tail_embed_b"] = np.zeros_like(model.tail_embed_b)

    dproj = np.zeros_like(proj)
    if l_align is not None:
        pn = np.linalg.norm(proj, axis=1)
        tn = np.linalg.norm(targets, axis=1)
        cos = np.sum(proj * targets, axis=1) / (pn * tn)
        class_w = np.where(y == 1, 0.5 / max((labels == 1).sum(), 1),
                           0.5 / max((labels == 0).sum(), 1))
        scale = w_aux * weights.lambda_align * class_w
        dproj += scale[:, None] * (
            cos[:, None] * proj / pn[:, None] ** 2 - targets / (pn * tn)[:, None]
        )
    if l_con is not None:
        dproj += weights.lambda_con * _supcon_grad(proj, labels, weights.temperature)

    grads["proj_w"] = dproj.T @ v
    grads["proj_b"] = dproj.sum(axis=0)
    dv += dproj @ model.proj_w
    grads["pixel_encoder_w"] = dv.T @ pixels
    grads["pixel_encoder_b"] = dv.sum(axis=0)
    return breakdown, grads


def _supcon_grad(emb: np.ndarray, labels: np.ndarray, temperature: float) -> np.ndarray:
    """Gradient of supcon_loss w.r.t. the raw (un-normalized) embeddings."""
    n = emb.shape[0]
    norms = np.linalg.norm(emb, axis=1)
    u = emb / norms[:, None]
    sims = (u @ u.T) / temperature
    same = labels[:, None] == labels[None, :]
    off_diag = ~np.eye(n, dtype=bool)
    pos = same & off_diag
    pos_counts = pos.sum(axis=1)
    anchors = pos_counts > 0
    n_anchors = int(anchors.sum())

    masked = np.where(off_diag, sims, -np.inf)
    row_max = masked.max(axis=1)
    exp = np.where(off_diag, np.exp(sims - row_max[:, None]), 0.0)
    softmax = exp / exp.sum(axis=1, keepdims=True)

    g = np.zeros((n, n))
    g[anchors] = (
        softmax[anchors] - pos[anchors] / pos_counts[anchors, None]
    ) / n_anchors
    du = (g + g.T) @ u / temperature
    # back through row normalization
    radial = np.sum(du * u, axis=1, keepdims=True)
    return (du - radial * u) / norms[:, None]


# --- training -------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 0.01
    total_steps: int = 2000
    seed: int = 0
    beta: float = 0.5
    weights: LossWeights = field(default_factory=LossWeights)
    # None resolves to min(800, total_steps // 10) so short runs keep the
    # warmup inside the plateau; pass a value to override.
    warmup_steps: int | None = None
    plateau_end_frac: float = 0.15
    anneal_end_frac: float = 0.45

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.total_steps < 1:
            raise ConfigError("total_steps must be >= 1")

    def schedule(self) -> CurriculumSchedule:
        warmup = self.warmup_steps
        if warmup is None:
            warmup = min(800, max(1, self.total_steps // 10))
        return CurriculumSchedule(
            total_steps=self.total_steps,
            warmup_steps=warmup,
            plateau_end_frac=self.plateau_end_frac,
            anneal_end_frac=self.anneal_end_frac,
        )


@dataclass(frozen=True)
class LogRow:
    step: int
    w_aux: float
    cls_loss: float
    con_loss: float | None
    freq_loss: float
    align_loss: float | None
    tail_loss: float
    total: float
    skipped: tuple[str, ...]


@dataclass
class TrainingLog:
    rows: list[LogRow]
    final_balanced_accuracy: float | None = None

    CSV_HEADER = "step,w_aux,L_cls,L_con,L_freq,L_align,L_tail,total,skipped_terms"

    def to_csv(self, path) -> None:
        def cell(x):
            return "" if x is None else f"{x:.9g}"

        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.CSV_HEADER + "\n")
            for r in self.rows:
                fh.write(
                    f"{r.step},{cell(r.w_aux)},{cell(r.cls_loss)},{cell(r.con_loss)},"
                    f"{cell(r.freq_loss)},{cell(r.align_loss)},{cell(r.tail_loss)},"
                    f"{cell(r.total)},{';'.join(r.skipped)}\n"
                )


def train(
    pixels: np.ndarray,
    feats: np.ndarray,
    labels: np.ndarray,
    config: TrainConfig = TrainConfig(),
    holdout: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[ToyStalModel, TrainingLog]:
    """Mini-batch gradient descent, bit-deterministic per seed.

    ``holdout`` is an optional (pixels, labels) pair evaluated once at the
    end with the spatial submodel; the result lands in the log.  Batches are
    drawn from seeded per-epoch permutations; a trailing partial batch is
    dropped (corpora smaller than one batch train full-batch).
    """
    pixels = np.atleast_2d(np.asarray(pixels, dtype=np.float64))
    feats = np.atleast_2d(np.asarray(feats, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64)
    n = pixels.shape[0]
    if feats.shape[0] != n or labels.shape[0] != n:
        raise DataError("pixels, features, labels must agree in length")
    if np.unique(labels).size < 2:
        raise DataError("training corpus must contain both classes")

    sched = config.schedule()
    weights = config.weights
    model = ToyStalModel.init(config.seed, beta=config.beta, feature_dim=feats.shape[1])
    shuffle_rng = np.random.default_rng([config.seed, 1])
    batch = min(config.batch_size, n)
    lr = config.learning_rate

    rows: list[LogRow] = []
    step = 0
    while step < config.total_steps:
        perm = shuffle_rng.permutation(n)
        for start in range(0, n - batch + 1, batch):
            if step >= config.total_steps:
                break
            sel = perm[start : start + batch]
            breakdown, grads = grad_total_loss(
                model, pixels[sel], feats[sel], labels[sel], weights, sched, step
            )
            for name, g in grads.items():
                cur = getattr(model, name)
                if isinstance(cur, np.ndarray):
                    cur -= lr * g
                else:
                    setattr(model, name, cur - lr * g)
            rows.append(
                LogRow(
                    step=step,
                    w_aux=breakdown.w_aux,
                    cls_loss=breakdown.cls_loss,
                    con_loss=breakdown.con_loss,
                    freq_loss=breakdown.freq_loss,
                    align_loss=breakdown.align_loss,
                    tail_loss=breakdown.tail_loss,
                    total=breakdown.total,
                    skipped=breakdown.skipped,
                )
            )
            step += 1

    log = TrainingLog(rows=rows)
    if holdout is not None:
        ho_pixels, ho_labels = holdout
        log.final_balanced_accuracy = balanced_accuracy(
            predict(model, ho_pixels), np.asarray(ho_labels)
        )
    return model, log


# --- inference ------------------------------------------------------------------

def predict(model: "ToyStalModel | SpatialSubmodel", pixels: np.ndarray) -> np.ndarray:
    """Fake-probability per sample, computed on the spatial submodel only."""
    sub = model.spatial_submodel() if isinstance(model, ToyStalModel) else model
    pixels = np.atleast_2d(np.asarray(pixels, dtype=np.float64))
    v = pixels @ sub.encoder_w.T + sub.encoder_b
    return sigmoid(v @ sub.cls_w + sub.cls_b)


def balanced_accuracy(probs: np.ndarray, labels: np.ndarray, threshold: float = 0.5) -> float:
    """Mean of the per-class accuracies at the given threshold."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if np.unique(labels).size < 2:
        raise MetricError("balanced accuracy needs both classes")
    preds = probs >= threshold
    acc_real = float(np.mean(~preds[labels == 0]))
    acc_fake = float(np.mean(preds[labels == 1]))
    return 0.5 * (acc_real + acc_fake)


# --- serialization ----------------------------------------------------------------

MODEL_FORMAT = "toy-stal-model"


def save_model(model: ToyStalModel, path) -> None:
    """Write the model as JSON: format tag, beta, and named parameter arrays."""
    params = {}
    for name in PARAM_NAMES:
        v = getattr(model, name)
        params[name] = v.tolist() if isinstance(v, np.ndarray) else float(v)
    doc = {"format": MODEL_FORMAT, "beta": float(model.beta), "params": params}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path) -> ToyStalModel:
    """Read a model written by save_model, validating names and shapes."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DecodeError(f"not a valid model file: {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise DataError(f"unrecognized model format in {path}")
    params = doc.get("params")
    if not isinstance(params, dict) or set(params) != set(PARAM_NAMES):
        raise DataError("model file must define exactly the documented parameters")
    try:
        feature_dim = len(params["freq_encoder_w"][0])
    except (TypeError, IndexError) as exc:
        raise DataError("freq_encoder_w must be a 2D array") from exc
    ref = ToyStalModel.init(0, feature_dim=feature_dim)
    kwargs = {"beta": float(doc.get("beta", 0.5))}
    for name in PARAM_NAMES:
        refv = getattr(ref, name)
        if isinstance(refv, np.ndarray):
            arr = np.asarray(params[name], dtype=np.float64)
            if arr.shape != refv.shape:
                raise DataError(f"parameter {name} has shape {arr.shape}, want {refv.shape}")
            kwargs[name] = arr
        else:
            kwargs[name] = float(params[name])
    return ToyStalModel(**kwargs)
