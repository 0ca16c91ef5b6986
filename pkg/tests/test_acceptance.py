"""Release-gate checks: every guarantee the package advertises, end to end.

Each test pins a quantitative bound and a wall-clock budget.  Expensive
artifacts (the synthetic corpus, cascade outputs) are built once per module
and shared; budgets cover the full computation for the criterion they gate.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from spectail import stal
from spectail.cli import _theorem1_sweep, _theorem2_sweep
from spectail.features import extract_features
from spectail.harmonics import (
    Activation2d,
    Cascade2dConfig,
    cascade2d,
    pink_noise,
    power_law_field,
    to_pixel_plane,
)
from spectail.spectrum import fit_power_law, radial_log_power, tail_uplift
from spectail.stal import (
    CurriculumSchedule,
    LossWeights,
    PARAM_NAMES,
    TEACHER_PARAMS,
    ToyStalModel,
    TrainConfig,
    curriculum_weight,
    grad_total_loss,
    teacher_targets,
    total_loss,
)
from spectail.transforms import jpeg_degrade

SIZE = 256
DEPTH = 4
N_NULLITY_SEEDS = 16


def _delta(plane: np.ndarray) -> float:
    return tail_uplift(radial_log_power(plane)).delta


# ---------------------------------------------------------------------------
# Shared expensive artifacts (built lazily, once per module)
# ---------------------------------------------------------------------------

_CACHE: dict = {}


def _nullity_results():
    """Tail-uplift change per activation over the 16-seed field set."""
    if "nullity" not in _CACHE:
        t0 = time.monotonic()
        fields = [pink_noise(SIZE, seed=10_000 + s) for s in range(N_NULLITY_SEEDS)]
        base = np.array([_delta(f) for f in fields])
        diffs = {}
        relu_out = []
        for kind in ("identity", "relu", "leaky_relu"):
            deltas = []
            for s, field in enumerate(fields):
                out = cascade2d(
                    field,
                    Cascade2dConfig(
                        depth=DEPTH, activation=Activation2d(kind), seed=20_000 + s
                    ),
                )
                if kind == "relu":
                    relu_out.append(out)
                deltas.append(_delta(out))
            diffs[kind] = np.array(deltas) - base
        _CACHE["nullity"] = {
            "diffs": diffs,
            "relu_fields": relu_out,
            "elapsed": time.monotonic() - t0,
        }
    return _CACHE["nullity"]


def _corpus():
    """400+400 training and 100+100 holdout images as model-ready arrays."""
    if "corpus" not in _CACHE:
        t0 = time.monotonic()

        def build(seed0: int, n_per_class: int, with_features: bool):
            pixels, feats, labels = [], [], []
            for i in range(n_per_class):
                real = to_pixel_plane(pink_noise(SIZE, seed=seed0 + i))
                fake = to_pixel_plane(
                    cascade2d(
                        pink_noise(SIZE, seed=seed0 + 10_000 + i),
                        Cascade2dConfig(
                            depth=DEPTH,
                            activation=Activation2d("relu"),
                            seed=seed0 + 20_000 + i,
                        ),
                    )
                )
                for plane, label in ((real, 0), (fake, 1)):
                    pixels.append(stal.pixel_summary(plane))
                    if with_features:
                        feats.append(extract_features(plane))
                    labels.append(label)
            return (
                np.array(pixels),
                np.array(feats) if with_features else None,
                np.array(labels, dtype=np.int64),
            )

        tr_px, tr_ft, tr_lb = build(0, 400, with_features=True)
        ho_px, _, ho_lb = build(700_000, 100, with_features=False)
        _CACHE["corpus"] = {
            "train": (tr_px, tr_ft, tr_lb),
            "holdout": (ho_px, ho_lb),
            "elapsed": time.monotonic() - t0,
        }
    return _CACHE["corpus"]


def _benchmark():
    """Both training arms (guided and spatial-only), five seeds each."""
    if "benchmark" not in _CACHE:
        corpus = _corpus()
        tr_px, tr_ft, tr_lb = corpus["train"]
        holdout = corpus["holdout"]
        t0 = time.monotonic()
        arms = {
            "on": LossWeights(),
            "off": LossWeights(lambda_freq=0.0, lambda_align=0.0, lambda_tail=0.0),
        }
        balanced: dict = {"on": [], "off": []}
        kept_model = None
        for seed in range(5):
            for name, weights in arms.items():
                cfg = TrainConfig(
                    total_steps=600, batch_size=64, seed=seed, weights=weights
                )
                model, log = stal.train(tr_px, tr_ft, tr_lb, cfg, holdout=holdout)
                balanced[name].append(log.final_balanced_accuracy)
                if kept_model is None:
                    kept_model = model
        _CACHE["benchmark"] = {
            "balanced": balanced,
            "model": kept_model,
            "elapsed": corpus["elapsed"] + (time.monotonic() - t0),
        }
    return _CACHE["benchmark"]


# ---------------------------------------------------------------------------
# 1. Single-layer harmonic generation: prediction vs both evaluation routes
# ---------------------------------------------------------------------------

def test_criterion_1_single_layer_harmonics():
    t0 = time.monotonic()
    worst_top, worst_route = _theorem1_sweep(trials=100, seed=0, sabotage=False)
    elapsed = time.monotonic() - t0
    assert worst_top < 1e-9
    assert worst_route < 1e-9
    assert elapsed < 5.0


# ---------------------------------------------------------------------------
# 2. Deep-cascade top harmonic: closed form vs simulation, log split, nullity
# ---------------------------------------------------------------------------

def test_criterion_2_cascade_closed_form():
    t0 = time.monotonic()
    worst_power, worst_log, worst_degenerate = _theorem2_sweep(max_depth=3, seed=0)
    elapsed = time.monotonic() - t0
    assert worst_power < 1e-6
    assert worst_log < 1e-9
    assert worst_degenerate < 1e-12
    assert elapsed < 10.0


# ---------------------------------------------------------------------------
# 3. Activation nullity on images: identity adds nothing, rectifiers lift
# ---------------------------------------------------------------------------

def test_criterion_3_activation_nullity_on_fields():
    res = _nullity_results()
    diffs = res["diffs"]
    assert np.mean(np.abs(diffs["identity"])) < 0.02
    assert np.mean(diffs["relu"]) >= 0.03
    assert np.mean(diffs["leaky_relu"]) >= 0.03
    assert res["elapsed"] < 60.0


# ---------------------------------------------------------------------------
# 4. The signature survives JPEG requantization at quality 60
# ---------------------------------------------------------------------------

def test_criterion_4_uplift_survives_jpeg():
    res = _nullity_results()
    t0 = time.monotonic()
    deltas = []
    for field in res["relu_fields"]:
        degraded = jpeg_degrade(to_pixel_plane(field), quality=60)
        deltas.append(_delta(degraded))
    elapsed = time.monotonic() - t0
    assert np.mean(deltas) >= 0.01
    assert res["elapsed"] + elapsed < 60.0


# ---------------------------------------------------------------------------
# 5. Spectral-slope estimation recovers planted exponents
# ---------------------------------------------------------------------------

def test_criterion_5_slope_recovery():
    t0 = time.monotonic()
    for alpha in (0.5, 1.0, 2.0, 3.0):
        fits = []
        for s in range(8):
            field = power_law_field(SIZE, alpha=alpha, seed=300 + s)
            fits.append(fit_power_law(radial_log_power(field)).alpha)
        assert np.max(np.abs(np.array(fits) - alpha)) < 0.1, f"alpha={alpha}"
    assert time.monotonic() - t0 < 30.0


# ---------------------------------------------------------------------------
# 6. Analytic gradients: finite differences and teacher stop-gradient
# ---------------------------------------------------------------------------

def test_criterion_6_gradients():
    t0 = time.monotonic()
    rng = np.random.default_rng(40)
    pixels = rng.normal(0.0, 0.2, size=(8, stal.SUMMARY_LEN))
    feats = rng.normal(size=(8, 74))
    labels = np.array([0, 1, 0, 1, 1, 0, 1, 0])
    model = ToyStalModel.init(seed=41)
    teacher = teacher_targets(model, feats)
    sched = CurriculumSchedule(total_steps=1000, warmup_steps=100)
    step = 120  # on the plateau: every term active

    weightings = (
        LossWeights(),  # total
        LossWeights(lambda_con=0, lambda_freq=0, lambda_align=0, lambda_tail=0),
        LossWeights(lambda_cls=0, lambda_freq=0, lambda_align=0, lambda_tail=0),
        LossWeights(lambda_cls=0, lambda_con=0, lambda_align=0, lambda_tail=0),
        LossWeights(lambda_cls=0, lambda_con=0, lambda_freq=0, lambda_tail=0),
        LossWeights(lambda_cls=0, lambda_con=0, lambda_freq=0, lambda_align=0),
    )
    h = 1e-6
    for weights in weightings:
        _, grads = grad_total_loss(
            model, pixels, feats, labels, weights, sched, step, teacher=teacher
        )

        def loss_at():
            return total_loss(
                model, pixels, feats, labels, weights, sched, step, teacher=teacher
            ).total

        for name in PARAM_NAMES:
            value = getattr(model, name)
            if isinstance(value, np.ndarray):
                flat = value.reshape(-1)
                probe = sorted(
                    {0, flat.size // 3, flat.size // 2, 2 * flat.size // 3, flat.size - 1}
                )
                for i in probe:
                    keep = flat[i]
                    flat[i] = keep + h
                    up = loss_at()
                    flat[i] = keep - h
                    down = loss_at()
                    flat[i] = keep
                    fd = (up - down) / (2 * h)
                    an = grads[name].reshape(-1)[i]
                    assert abs(fd - an) <= 1e-4 * max(1.0, abs(fd), abs(an)), (
                        f"{name}[{i}]: fd {fd} vs analytic {an}"
                    )
            else:
                keep = value
                setattr(model, name, keep + h)
                up = loss_at()
                setattr(model, name, keep - h)
                down = loss_at()
                setattr(model, name, keep)
                fd = (up - down) / (2 * h)
                assert abs(fd - grads[name]) <= 1e-4 * max(1.0, abs(fd))

    # stop-gradient: live-teacher alignment must not touch teacher parameters
    align_only = LossWeights(lambda_cls=0, lambda_con=0, lambda_freq=0, lambda_tail=0)
    _, grads = grad_total_loss(model, pixels, feats, labels, align_only, sched, step)
    for name in TEACHER_PARAMS:
        assert np.max(np.abs(np.asarray(grads[name]))) < 1e-8
    assert time.monotonic() - t0 < 10.0


# ---------------------------------------------------------------------------
# 7. Curriculum weight: warmup, plateau, cosine anneal, bounded jumps
# ---------------------------------------------------------------------------

def test_criterion_7_curriculum_shape():
    total = 8000
    sched = CurriculumSchedule(total_steps=total, warmup_steps=800)
    assert curriculum_weight(0, sched) == 0.0
    assert curriculum_weight(800, sched) == 1.0
    plateau_end = int(0.15 * total)
    for s in range(800, plateau_end + 1):
        assert curriculum_weight(s, sched) == 1.0
    anneal_end = int(0.45 * total)
    midpoint = (plateau_end + anneal_end) // 2
    assert curriculum_weight(midpoint, sched) == pytest.approx(0.5, abs=1e-9)
    for s in range(anneal_end, total + 1, 50):
        assert curriculum_weight(s, sched) == 0.0
    values = np.array([curriculum_weight(s, sched) for s in range(total + 1)])
    assert np.max(np.abs(np.diff(values))) < 2.0 / total + 1.0 / 800


# ---------------------------------------------------------------------------
# 8. Detector benchmark: accuracy floor and no harm from the guidance
# ---------------------------------------------------------------------------

def test_criterion_8_detector_benchmark():
    bench = _benchmark()
    on = np.array(bench["balanced"]["on"], dtype=np.float64)
    off = np.array(bench["balanced"]["off"], dtype=np.float64)
    assert on.shape == off.shape == (5,)
    assert np.all(np.isfinite(on)) and np.all(np.isfinite(off))
    assert on.mean() >= 0.90
    assert on.mean() - off.mean() >= -0.01
    assert bench["elapsed"] < 300.0


# ---------------------------------------------------------------------------
# 9. Inference independence: predictions never touch the frequency branch
# ---------------------------------------------------------------------------

def test_criterion_9_inference_independence(tmp_path):
    bench = _benchmark()
    model = bench["model"]
    ho_px, _ = _corpus()["holdout"]

    full = stal.predict(model, ho_px)
    zeroed = stal.predict(model.with_zeroed_frequency_branch(), ho_px)
    assert np.array_equal(full, zeroed)

    path = tmp_path / "model.json"
    stal.save_model(model.with_zeroed_frequency_branch(), path)
    assert np.array_equal(stal.predict(stal.load_model(path), ho_px), full)
