"""Command-line surface: spectra, corpus analysis, oracle sweeps, synthesis, training.

Subcommands
-----------
spectrum   radial log-power spectrum of one image as CSV on stdout
analyze    per-image tail statistics and corpus aggregates for a manifest
theorems   randomized oracle sweeps for the harmonic-generation results
synth      generate a pink-noise-vs-cascade image corpus with a manifest
train      fit the toy detector on a manifest corpus
eval       score a trained model on a manifest corpus

Exit codes: 0 success, 1 assertion/verification failure, 2 I/O or decode
problem, 3 wrong dimensions or sizes, 4 invalid inputs or configuration.

Manifests are CSV files `path,label[,tag]` with label `real` or `fake`;
relative paths resolve against the manifest's directory.  A first line
starting with `path` is treated as a header. The environment variable
SPECTAIL_THREADS caps analyze's worker pool.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import io
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import harmonics, stal
from .errors import (
    ConfigError,
    DataError,
    DecodeError,
    DimensionError,
    DomainError,
    FitError,
    MetricError,
    NumericError,
    PreconditionError,
    SpectailError,
)
from .features import extract_features
from .ingest import DEFAULT_ANALYSIS_SIZE, center_crop_pow2, decode, to_ycbcr
from .spectrum import (
    DEFAULT_BINS,
    RadialSpectrum,
    fit_power_law,
    normalize_anchor,
    radial_log_power,
    tail_uplift,
)
from .transforms import jpeg_degrade

VALID_LABELS = ("real", "fake")


def _fmt(x: float) -> str:
    return f"{x:.9g}"


# --- manifests ------------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    label: str
    tag: str = ""


def read_manifest(path) -> list[ManifestEntry]:
    """Parse a `path,label[,tag]` CSV; paths resolve against its directory."""
    manifest_path = Path(path)
    base = manifest_path.parent
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    with open(manifest_path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if lineno == 1 and line.split(",")[0].strip() == "path":
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) not in (2, 3):
                raise DataError(f"{manifest_path}:{lineno}: expected path,label[,tag]")
            rel, label = parts[0], parts[1]
            tag = parts[2] if len(parts) == 3 else ""
            if label not in VALID_LABELS:
                raise DataError(
                    f"{manifest_path}:{lineno}: label must be one of {VALID_LABELS}, got {label!r}"
                )
            if rel in seen:
                raise DataError(f"{manifest_path}:{lineno}: duplicate path {rel!r}")
            seen.add(rel)
            p = Path(rel)
            entries.append(ManifestEntry(path=p if p.is_absolute() else base / p, label=label, tag=tag))
    if not entries:
        raise DataError(f"manifest {manifest_path} has no entries")
    return entries


def _load_plane(path, size: int, channel: str = "y") -> np.ndarray:
    rgb = decode(path)
    if channel == "y":
        plane = to_ycbcr(rgb).y
    else:
        plane = rgb[..., "rgb".index(channel)]
    return center_crop_pow2(plane, size)


# --- spectrum -------------------------------------------------------------------

def _spectrum_csv(spec: RadialSpectrum, out) -> None:
    out.write("rho,log10_power,count\n")
    for r, p, c in zip(spec.rho, spec.log_power, spec.counts):
        out.write(f"{_fmt(r)},{_fmt(p)},{c}\n")


def cmd_spectrum(args) -> int:
    plane = _load_plane(args.image, args.size, args.channel)
    spec = radial_log_power(plane, bins=args.bins)
    _spectrum_csv(spec, sys.stdout)
    return 0


# --- analyze --------------------------------------------------------------------

def _worker_count() -> int:
    raw = os.environ.get("SPECTAIL_THREADS")
    if raw is not None:
        try:
            n = int(raw)
        except ValueError as exc:
            raise ConfigError(f"SPECTAIL_THREADS must be an integer, got {raw!r}") from exc
        if n < 1:
            raise ConfigError(f"SPECTAIL_THREADS must be >= 1, got {n}")
        return n
    return min(8, os.cpu_count() or 1)


def _cache_key(content: bytes, size: int, bins: int, channel: str) -> str:
    return f"{hashlib.sha256(content).hexdigest()}:{size}:{bins}:{channel}"


def _analyze_one(entry: ManifestEntry, size: int, bins: int, cache: dict):
    """Returns (entry, spectrum, cache_key, from_cache) or raises."""
    content = Path(entry.path).read_bytes()
    key = _cache_key(content, size, bins, "y")
    if key in cache:
        c = cache[key]
        spec = RadialSpectrum(
            rho=np.asarray(c["rho"], dtype=np.float64),
            log_power=np.asarray(c["log_power"], dtype=np.float64),
            counts=np.asarray(c["counts"], dtype=np.int64),
        )
        return entry, spec, key, True
    rgb = decode(io.BytesIO(content), name=str(entry.path))
    plane = center_crop_pow2(to_ycbcr(rgb).y, size)
    return entry, radial_log_power(plane, bins=bins), key, False


def cmd_analyze(args) -> int:
    entries = read_manifest(args.manifest)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cache_path = out_dir / "spectrum_cache.json"
    cache: dict = {}
    if cache_path.exists():
        try:
            cache = json.loads(cache_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            cache = {}

    rows = []       # (entry, alpha, residual, rho_min, delta, anchored_spec)
    errors = []     # (path string, message)
    with concurrent.futures.ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        futures = {pool.submit(_analyze_one, e, args.size, args.bins, cache): e for e in entries}
        for fut in concurrent.futures.as_completed(futures):
            entry = futures[fut]
            try:
                entry, spec, key, from_cache = fut.result()
                fit = fit_power_law(spec)
                anchored = normalize_anchor(spec)
                tail = tail_uplift(anchored)
            except (SpectailError, OSError) as exc:
                errors.append((str(entry.path), str(exc)))
                continue
            if not from_cache:
                cache[key] = {
                    "rho": [float(v) for v in spec.rho],
                    "log_power": [float(v) for v in spec.log_power],
                    "counts": [int(v) for v in spec.counts],
                }
            rows.append((entry, fit.alpha, fit.residual_rms, tail.rho_min, tail.delta, anchored))

    if not rows:
        for path, msg in errors:
            print(f"error: {path}: {msg}", file=sys.stderr)
        print("error: every image in the manifest failed to analyze", file=sys.stderr)
        return 2

    rows.sort(key=lambda r: str(r[0].path))
    errors.sort()

    with open(out_dir / "per_image.csv", "w", encoding="utf-8") as fh:
        fh.write("path,label,tag,alpha,residual_rms,rho_min,delta\n")
        for entry, alpha, resid, rho_min, delta, _ in rows:
            fh.write(
                f"{entry.path},{entry.label},{entry.tag},"
                f"{_fmt(alpha)},{_fmt(resid)},{_fmt(rho_min)},{_fmt(delta)}\n"
            )

    per_label: dict = {}
    for label in VALID_LABELS:
        sel = [r for r in rows if r[0].label == label]
        if not sel:
            continue
        stats = {}
        for name, idx in (("alpha", 1), ("residual_rms", 2), ("rho_min", 3), ("delta", 4)):
            vals = np.array([r[idx] for r in sel], dtype=np.float64)
            stats[name] = {"mean": float(vals.mean()), "std": float(vals.std())}
        per_label[label] = {"n": len(sel), **stats}

        curves = np.array([r[5].log_power for r in sel])
        mean_curve = curves.mean(axis=0)
        rho = sel[0][5].rho
        with open(out_dir / f"tail_curve_{label}.csv", "w", encoding="utf-8") as fh:
            fh.write("rho,mean_anchored_log10_power\n")
            for r, p in zip(rho, mean_curve):
                fh.write(f"{_fmt(r)},{_fmt(p)}\n")

    corpus = {
        "n_images": len(entries),
        "n_analyzed": len(rows),
        "n_failed": len(errors),
        "errors": [{"path": p, "error": m} for p, m in errors],
        "per_label": per_label,
        "size": args.size,
        "bins": args.bins,
    }
    with open(out_dir / "corpus.json", "w", encoding="utf-8") as fh:
        json.dump(corpus, fh, indent=1, sort_keys=True)
        fh.write("\n")

    cache_path.write_text(
        json.dumps(cache, indent=None, sort_keys=True) + "\n", encoding="utf-8"
    )
    for path, msg in errors:
        print(f"warning: skipped {path}: {msg}", file=sys.stderr)
    print(f"analyzed {len(rows)}/{len(entries)} images -> {out_dir}")
    return 0


# --- theorems -------------------------------------------------------------------

def _theorem1_sweep(trials: int, seed: int, sabotage: bool):
    rng = np.random.default_rng(seed)
    worst_top = 0.0
    worst_route = 0.0
    for i in range(trials):
        bandwidth = int(rng.integers(1, 9))
        degree = int(rng.integers(2, 5))
        sig = harmonics.random_real_signal(bandwidth, seed=seed + 1000 + i)
        coeffs = rng.normal(size=degree + 1)
        coeffs[-1] = rng.uniform(0.3, 1.5) * (1 if rng.uniform() < 0.5 else -1)
        act = harmonics.PolyActivation(coeffs=tuple(coeffs))

        rep = harmonics.check_theorem1(sig, act)
        predicted = -rep.predicted if sabotage else rep.predicted
        err = abs(rep.measured - predicted) / max(abs(predicted), 1e-300)
        worst_top = max(worst_top, err)

        out_c = harmonics.poly_apply_coeffs(sig, act)
        out_t = harmonics.poly_apply_time(sig, act)
        scale = max(np.max(np.abs(out_c.coeffs)), 1e-300)
        worst_route = max(worst_route, float(np.max(np.abs(out_c.coeffs - out_t.coeffs))) / scale)
    return worst_top, worst_route


def _random_cascade(rng, depth: int, degree: int, k0: int):
    filters = []
    for layer in range(1, depth + 1):
        max_k = degree ** (layer - 1) * k0
        table = {0: rng.uniform(0.4, 1.5)}
        for k in range(1, max_k + 1):
            mag = rng.uniform(0.4, 1.5)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            table[k] = mag * np.exp(1j * phase)
        filters.append(table)
    coeffs = rng.normal(size=degree + 1)
    coeffs[-1] = rng.uniform(0.4, 1.4) * (1 if rng.uniform() < 0.5 else -1)
    return harmonics.CascadeConfig(
        depth=depth, activation=harmonics.PolyActivation(coeffs=tuple(coeffs)), filters=tuple(filters)
    )


def _theorem2_sweep(max_depth: int, seed: int):
    rng = np.random.default_rng(seed + 77)
    worst_power = 0.0
    worst_log = 0.0
    worst_degenerate = 0.0
    for depth in range(1, max_depth + 1):
        for degree in (2, 3):
            for k0 in (1, 2):
                for amplitude in (0.7, 1.3):
                    cfg = _random_cascade(rng, depth, degree, k0)
                    tone = harmonics.ToneInput(k0=k0, amplitude=amplitude)
                    top_freq = degree**depth * k0
                    sim = harmonics.simulate_cascade(cfg, tone)[-1]
                    sim_power = abs(sim.coeff(top_freq)) ** 2
                    rep = harmonics.closed_form_top_power(cfg, tone)
                    worst_power = max(
                        worst_power, abs(sim_power - rep.power) / max(rep.power, 1e-300)
                    )
                    worst_log = max(
                        worst_log,
                        abs(rep.log_constant + sum(rep.layer_log_terms) - np.log(rep.power)),
                    )

                    # knock out one chain gain: the top harmonic must vanish
                    layer = int(rng.integers(1, depth + 1))
                    broken = [dict(t) for t in cfg.filters]
                    broken[layer - 1][degree ** (layer - 1) * k0] = 0.0
                    cfg2 = harmonics.CascadeConfig(
                        depth=depth, activation=cfg.activation, filters=tuple(broken)
                    )
                    rep2 = harmonics.closed_form_top_power(cfg2, tone)
                    sim2 = harmonics.simulate_cascade(cfg2, tone)[-1]
                    if not (rep2.degenerate and rep2.power == 0.0):
                        worst_degenerate = np.inf
                    worst_degenerate = max(worst_degenerate, abs(sim2.coeff(top_freq)) ** 2)
    return worst_power, worst_log, worst_degenerate


def cmd_theorems(args) -> int:
    t1_top, t1_route = _theorem1_sweep(args.trials, args.seed, args.sabotage)
    t2_power, t2_log, t2_degen = _theorem2_sweep(args.max_depth, args.seed)
    checks = [
        ("theorem1 top-coefficient rel err", t1_top, 1e-9),
        ("theorem1 coeff-vs-time rel err", t1_route, 1e-9),
        ("theorem2 closed-form rel err", t2_power, 1e-6),
        ("theorem2 log-decomposition err", t2_log, 1e-9),
        ("theorem2 degenerate top power", t2_degen, 1e-12),
    ]
    ok = True
    for name, value, bound in checks:
        status = "PASS" if value < bound else "FAIL"
        ok = ok and value < bound
        print(f"{status} {name}: max {value:.3e} (bound {bound:g})")
    print(f"theorem sweeps: {'all passed' if ok else 'FAILED'} "
          f"(trials={args.trials}, max_depth={args.max_depth}, seed={args.seed})")
    return 0 if ok else 1


# --- synth ----------------------------------------------------------------------

def _save_png(plane: np.ndarray, path: Path) -> None:
    Image.fromarray(plane.astype(np.uint8), mode="L").save(path)


def cmd_synth(args) -> int:
    if args.count < 1:
        raise DataError(f"--count must be >= 1, got {args.count}")
    if args.depth < 1:
        raise DataError(f"--depth must be >= 1, got {args.depth}")
    if args.jpeg_quality is not None and not 1 <= args.jpeg_quality <= 100:
        raise DataError(f"--jpeg-quality must be in [1, 100], got {args.jpeg_quality}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    activation = harmonics.Activation2d(args.activation)
    lines = ["path,label,tag"]
    for i in range(args.count):
        real = harmonics.to_pixel_plane(harmonics.pink_noise(args.size, seed=args.seed + i))
        fake_field = harmonics.cascade2d(
            harmonics.pink_noise(args.size, seed=args.seed + 10_000 + i),
            harmonics.Cascade2dConfig(
                depth=args.depth, activation=activation, seed=args.seed + 20_000 + i
            ),
        )
        fake = harmonics.to_pixel_plane(fake_field)
        if args.jpeg_quality is not None:
            real = jpeg_degrade(real, args.jpeg_quality)
            fake = jpeg_degrade(fake, args.jpeg_quality)
            real = np.clip(np.round(real), 0.0, 255.0)
            fake = np.clip(np.round(fake), 0.0, 255.0)
        real_name, fake_name = f"real_{i:04d}.png", f"fake_{i:04d}.png"
        _save_png(real, out_dir / real_name)
        _save_png(fake, out_dir / fake_name)
        lines.append(f"{real_name},real,pink")
        lines.append(f"{fake_name},fake,{args.activation}")
    manifest = out_dir / "manifest.csv"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {2 * args.count} images and {manifest}")
    return 0


# --- train / eval -----------------------------------------------------------------

def _corpus_arrays(entries: list[ManifestEntry], size: int):
    pixels, feats, labels = [], [], []
    for entry in entries:
        plane = _load_plane(entry.path, size)
        pixels.append(stal.pixel_summary(plane))
        feats.append(extract_features(plane))
        labels.append(0 if entry.label == "real" else 1)
    return np.array(pixels), np.array(feats), np.array(labels, dtype=np.int64)


def cmd_train(args) -> int:
    entries = read_manifest(args.manifest)
    pixels, feats, labels = _corpus_arrays(entries, args.size)
    weights = stal.LossWeights()
    if args.spatial_only:
        weights = stal.LossWeights(lambda_freq=0.0, lambda_align=0.0, lambda_tail=0.0)
    config = stal.TrainConfig(
        batch_size=args.batch,
        learning_rate=args.lr,
        total_steps=args.steps,
        seed=args.seed,
        beta=args.beta,
        weights=weights,
    )
    holdout = None
    if args.holdout is not None:
        ho_entries = read_manifest(args.holdout)
        ho_pixels, _, ho_labels = _corpus_arrays(ho_entries, args.size)
        holdout = (ho_pixels, ho_labels)
    model, log = stal.train(pixels, feats, labels, config, holdout=holdout)
    stal.save_model(model, args.out)
    if args.log is not None:
        log.to_csv(args.log)
    msg = f"trained {args.steps} steps on {len(entries)} images -> {args.out}"
    if log.final_balanced_accuracy is not None:
        msg += f" (holdout balanced accuracy {log.final_balanced_accuracy:.4f})"
    print(msg)
    return 0


def cmd_eval(args) -> int:
    model = stal.load_model(args.model)
    entries = read_manifest(args.manifest)
    pixels, labels = [], []
    for entry in entries:
        plane = _load_plane(entry.path, args.size)
        pixels.append(stal.pixel_summary(plane))
        labels.append(0 if entry.label == "real" else 1)
    pixels = np.array(pixels)
    labels = np.array(labels, dtype=np.int64)
    probs = stal.predict(model, pixels)
    preds = probs >= 0.5
    metrics = {
        "balanced_accuracy": stal.balanced_accuracy(probs, labels),
        "accuracy_real": float(np.mean(~preds[labels == 0])) if np.any(labels == 0) else None,
        "accuracy_fake": float(np.mean(preds[labels == 1])) if np.any(labels == 1) else None,
        "n_real": int(np.sum(labels == 0)),
        "n_fake": int(np.sum(labels == 1)),
        "threshold": 0.5,
    }
    text = json.dumps(metrics, indent=1, sort_keys=True) + "\n"
    if args.out is not None:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


# --- entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectail",
        description="Spectral-tail analysis toolkit: radial spectra, tail uplift, "
        "harmonic-cascade oracles, synthetic corpora, and a toy two-branch detector.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="radial log-power spectrum of one image (CSV to stdout)")
    p.add_argument("image", help="image file to analyze")
    p.add_argument("--bins", type=int, default=DEFAULT_BINS, help="radial bins (default 128)")
    p.add_argument("--channel", choices=("y", "r", "g", "b"), default="y",
                   help="plane to analyze (default luma)")
    p.add_argument("--size", type=int, default=DEFAULT_ANALYSIS_SIZE,
                   help="center-crop size, power of two (default 256)")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("analyze", help="batch tail statistics for a manifest corpus")
    p.add_argument("manifest", help="CSV manifest: path,label[,tag]")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--size", type=int, default=DEFAULT_ANALYSIS_SIZE)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("theorems", help="randomized oracle sweeps for the cascade results")
    p.add_argument("--trials", type=int, default=100, help="theorem-1 sweep size (default 100)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-depth", type=int, default=3)
    p.add_argument("--sabotage", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_theorems)

    p = sub.add_parser("synth", help="generate a pink-noise vs cascade-fake corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, required=True, help="images per class")
    p.add_argument("--size", type=int, default=DEFAULT_ANALYSIS_SIZE)
    p.add_argument("--activation", choices=sorted(harmonics.ACTIVATION_KINDS), default="relu")
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--jpeg-quality", type=int, default=None,
                   help="optionally JPEG-quantize every image at this quality")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the toy detector on a manifest corpus")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--holdout", default=None, help="optional manifest for a final evaluation")
    p.add_argument("--log", default=None, help="optional training-log CSV path")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--size", type=int, default=DEFAULT_ANALYSIS_SIZE)
    p.add_argument("--spatial-only", action="store_true",
                   help="zero the auxiliary loss weights (ablation)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a trained model on a manifest corpus")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True, help="model JSON from `spectail train`")
    p.add_argument("--out", default=None, help="metrics JSON path (default stdout)")
    p.add_argument("--size", type=int, default=DEFAULT_ANALYSIS_SIZE)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DecodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DimensionError as exc:  # includes SizeError
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (
        ConfigError,
        DataError,
        DomainError,
        FitError,
        MetricError,
        NumericError,
        PreconditionError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except AssertionError as exc:
        print(f"error: verification failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
