"""End-to-end orchestration: extraction, codebook, encoding, training and LOGO evaluation."""

from __future__ import annotations

import hashlib
import json
import logging
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fisher, mlp
from .config import RunConfig
from .errors import EmptyInput, SingleClass, SingleGroup
from .frames import open_source
from .manifest import Manifest, read_manifest
from .tracking import extract_trajectories, write_trajectories
from .ts import encode_video, feature_matrix, read_features, write_features

log = logging.getLogger(__name__)


@dataclass
class VideoFeatures:
    key: str
    matrix: np.ndarray
    n_frames: int = 0
    n_trajectories: int = 0
    width: int = 0
    height: int = 0
    seconds: float = 0.0
    warning: str | None = None
    trajectories: list = field(default=None, repr=False)


def extract_video(path, config: RunConfig = RunConfig(), key=None, keep_trajectories=False) -> VideoFeatures:
    """Decode, track and encode one video into its TS feature matrix."""
    t0 = time.perf_counter()
    frames = list(open_source(path))
    dim = config.ts.feature_dim
    key = key or Path(path).stem
    if not frames:
        return VideoFeatures(key, np.empty((0, dim)), warning="video has no frames")
    h, w = frames[0].data.shape
    if len(frames) < config.tracker.L + 1:
        return VideoFeatures(
            key, np.empty((0, dim)), len(frames), 0, w, h, time.perf_counter() - t0,
            warning=f"only {len(frames)} frames; a trajectory needs {config.tracker.L + 1}",
        )
    trajs = extract_trajectories(
        frames, config.tracker, config.flow, config.pyramid.scale_factor, config.pyramid.min_side
    )
    feats = encode_video(trajs, w, h, config.ts)
    out = VideoFeatures(key, feature_matrix(feats, dim), len(frames), len(trajs), w, h, time.perf_counter() - t0)
    if not feats:
        out.warning = "no TS features (no trajectory survived tracking)"
    if keep_trajectories:
        out.trajectories = trajs
    return out


def _extract_job(args):
    row, config, out_dir, dump = args
    try:
        vf = extract_video(row.path, config, row.key, keep_trajectories=dump)
    except Exception as exc:  # recorded per video; the batch continues
        return {"path": str(row.path), "key": row.key, "error": f"{type(exc).__name__}: {exc}"}
    feat_file = Path(out_dir) / f"{row.key}.tsf"
    write_features(feat_file, vf.matrix, config.ts.feature_dim)
    info = {
        "path": str(row.path), "key": row.key, "feature_file": feat_file.name,
        "n_frames": vf.n_frames, "n_trajectories": vf.n_trajectories, "n_features": len(vf.matrix),
        "width": vf.width, "height": vf.height, "seconds": round(vf.seconds, 4),
    }
    if dump:
        trj = Path(out_dir) / f"{row.key}.trj"
        write_trajectories(trj, vf.trajectories or [], config.tracker.L)
        info["trajectory_file"] = trj.name
    if vf.warning:
        info["warning"] = vf.warning
    return info


def _map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def cmd_extract(manifest, config: RunConfig, out_dir, dump_trajectories=False) -> dict:
    """Write ``<key>.tsf`` per manifest row plus an ``extract.json`` sidecar.

    Per-video failures are recorded and skipped; ``summary["failures"]`` counts them.
    """
    if not isinstance(manifest, Manifest):
        manifest = read_manifest(manifest)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(row, config, out, dump_trajectories) for row in manifest]
    videos = _map(_extract_job, jobs, config.effective_workers())
    for v in videos:
        if "error" in v:
            log.error("extract failed for %s: %s", v["path"], v["error"])
        elif "warning" in v:
            log.warning("%s: %s", v["path"], v["warning"])
    summary = {
        "manifest": manifest.name,
        "feature_dim": config.ts.feature_dim,
        "videos": videos,
        "failures": sum("error" in v for v in videos),
        "config": config.to_dict(),
    }
    (out / "extract.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return summary


def feature_files(feature_dir, suffix=".tsf"):
    return sorted(Path(feature_dir).glob(f"*{suffix}"))


def stack_features(matrices) -> np.ndarray:
    mats = [m for m in matrices if len(m)]
    if not mats:
        raise EmptyInput("no features in the training split")
    return np.concatenate(mats)


@dataclass
class Codebook:
    gmm: fisher.GmmModel
    pca: fisher.Pca | None = None
    n_samples: int = 0

    def project(self, x):
        return self.pca.transform(x) if self.pca is not None else np.asarray(x, dtype=np.float64)


def fit_codebook(matrices, params) -> Codebook:
    """Subsample across all given feature matrices and fit the GMM (optionally after PCA)."""
    sample = fisher.subsample(stack_features(matrices), params.ratio, params.seed)
    pca = fisher.fit_pca(sample, params.pca_dim) if params.pca_dim else None
    if pca is not None:
        sample = pca.transform(sample)
    gmm = fisher.fit_gmm(sample, params.n_components, params.seed, params.max_iters, params.tol)
    return Codebook(gmm, pca, len(sample))


def cmd_fit_codebook(feature_dir, out_path, config: RunConfig = RunConfig(), keys=None) -> Codebook:
    """Fit a GMM1 codebook on the TSF1 files in ``feature_dir`` (restricted to ``keys`` if given)."""
    files = feature_files(feature_dir)
    if keys is not None:
        keys = set(keys)
        files = [f for f in files if f.stem in keys]
    cb = fit_codebook([read_features(f) for f in files], config.codebook)
    fisher.write_gmm(out_path, cb.gmm)
    if cb.pca is not None:
        np.savez(Path(out_path).with_suffix(".pca.npz"), mean=cb.pca.mean, components=cb.pca.components)
    return cb


def load_codebook(path) -> Codebook:
    gmm = fisher.read_gmm(path)
    pca_file = Path(path).with_suffix(".pca.npz")
    pca = None
    if pca_file.exists():
        with np.load(pca_file) as z:
            pca = fisher.Pca(z["mean"], z["components"])
    return Codebook(gmm, pca)


def encode_video_fv(matrix, codebook: Codebook, alpha=0.5) -> fisher.FisherVector:
    fv = fisher.encode_fisher(codebook.project(matrix), codebook.gmm)
    return fisher.normalize(fv, alpha)


def cmd_encode(feature_dir, gmm_path, out_dir, config: RunConfig = RunConfig()) -> dict:
    """Write one normalized FV per feature file as a single-row TSF1 ``<key>.fv``."""
    cb = load_codebook(gmm_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    done, skipped = [], []
    for f in feature_files(feature_dir):
        x = read_features(f)
        if len(x) == 0:
            skipped.append(f.stem)
            log.warning("%s: no features, skipped", f.name)
            continue
        fv = encode_video_fv(x, cb, config.codebook.alpha)
        write_features(out / f"{f.stem}.fv", fv.values[None, :])
        done.append(f.stem)
    return {"encoded": done, "skipped": skipped}


def cmd_train(fv_dir, manifest, out_path, config: RunConfig = RunConfig()) -> mlp.MlpModel:
    """Train the MLP on the ``<key>.fv`` files that appear in ``manifest``."""
    if not isinstance(manifest, Manifest):
        manifest = read_manifest(manifest)
    xs, ys = [], []
    for row in manifest:
        f = Path(fv_dir) / f"{row.key}.fv"
        if f.exists():
            xs.append(read_features(f)[0])
            ys.append(row.label)
    if not xs:
        raise EmptyInput(f"no Fisher vectors for manifest rows in {fv_dir}")
    model = mlp.train(xs, ys, config.mlp.train, config.mlp.hidden_dim, config.mlp.activation)
    mlp.write_mlp(out_path, model)
    return model


# ---------------------------------------------------------------------------
# leave-one-group-out evaluation


def _fv_or_zeros(matrix, codebook, alpha):
    dim = 2 * codebook.gmm.dim * codebook.gmm.n_components
    if len(matrix) == 0:
        return np.zeros(dim), False
    return encode_video_fv(matrix, codebook, alpha).values, True


def load_or_extract(manifest: Manifest, config: RunConfig, feature_dir=None) -> dict:
    """Feature matrix per manifest key, read from ``feature_dir`` when present there."""
    out = {}
    todo = []
    for row in manifest:
        f = Path(feature_dir) / f"{row.key}.tsf" if feature_dir else None
        if f is not None and f.exists():
            out[row.key] = read_features(f)
        else:
            todo.append(row)
    if todo:
        if feature_dir:
            summary = cmd_extract(Manifest(manifest.name, tuple(todo)), config, feature_dir)
            failed = [v for v in summary["videos"] if "error" in v]
            if failed:
                raise RuntimeError(f"feature extraction failed: {failed[0]['path']}: {failed[0]['error']}")
            for row in todo:
                out[row.key] = read_features(Path(feature_dir) / f"{row.key}.tsf")
        else:
            for row in todo:
                out[row.key] = extract_video(row.path, config, row.key).matrix
    return out


def confusion_matrix(true, pred, labels):
    idx = {lab: i for i, lab in enumerate(labels)}
    cm = np.zeros((len(labels), len(labels)), dtype=int)
    for t, p in zip(true, pred):
        cm[idx[t], idx[p]] += 1
    return cm


def cmd_eval_logo(manifest, config: RunConfig = RunConfig(), feature_dir=None, out_dir=None) -> dict:
    """Leave-one-group-out accuracy: codebook and MLP are fitted on the other groups only
    (unless ``config.shared_codebook``), then the held-out group is classified."""
    if not isinstance(manifest, Manifest):
        manifest = read_manifest(manifest)
    groups = manifest.groups
    if len(groups) < 2:
        raise SingleGroup(f"leave-one-group-out needs >= 2 groups, got {groups}")
    labels = manifest.labels
    if len(labels) < 2:
        raise SingleClass("evaluation needs at least two labels")
    feats = load_or_extract(manifest, config, feature_dir)
    rows = list(manifest)
    shared = None
    if config.shared_codebook:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            shared = fit_codebook([feats[r.key] for r in rows], config.codebook)
    folds, audit, all_true, all_pred = [], [], [], []
    for g in groups:
        train_rows = [r for r in rows if r.group != g]
        test_rows = [r for r in rows if r.group == g]
        cb_rows = rows if shared is not None else train_rows
        entry = {
            "group": g,
            "codebook": [str(r.path) for r in cb_rows],
            "classifier": [],
            "test": [str(r.path) for r in test_rows],
        }
        if config.baseline == "random":
            rng = np.random.default_rng([config.seed, g])
            pred = [labels[i] for i in rng.integers(len(labels), size=len(test_rows))]
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)
                cb = shared or fit_codebook([feats[r.key] for r in train_rows], config.codebook)
            xs, ys = [], []
            for r in train_rows:
                v, ok = _fv_or_zeros(feats[r.key], cb, config.codebook.alpha)
                if ok:
                    xs.append(v)
                    ys.append(r.label)
                    entry["classifier"].append(str(r.path))
            if len(set(ys)) < 2:
                raise SingleClass(f"fold {g}: fewer than two classes have features")
            model = mlp.train(xs, ys, config.mlp.train, config.mlp.hidden_dim, config.mlp.activation)
            test_x = np.stack([_fv_or_zeros(feats[r.key], cb, config.codebook.alpha)[0] for r in test_rows])
            pred = mlp.predict_labels(model, test_x)
        if shared is None:
            fitted = set(entry["codebook"]) | set(entry["classifier"])
            leaked = fitted & set(entry["test"])
            if leaked:
                raise RuntimeError(f"fold {g}: test videos reached fitting: {sorted(leaked)}")
        true = [r.label for r in test_rows]
        acc = float(np.mean([t == p for t, p in zip(true, pred)]))
        folds.append({"group": g, "n_test": len(test_rows), "accuracy": acc})
        audit.append(entry)
        all_true += true
        all_pred += pred
    report = {
        "manifest": manifest.name,
        "labels": labels,
        "folds": folds,
        "mean_accuracy": float(np.mean([f["accuracy"] for f in folds])),
        "confusion_matrix": confusion_matrix(all_true, all_pred, labels).tolist(),
        "baseline": config.baseline,
        "shared_codebook": config.shared_codebook,
        "config": config.to_dict(),
        "audit": audit,
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
        (out / "report.txt").write_text(format_report(report))
    return report


def format_report(report) -> str:
    lines = [f"dataset: {report['manifest']}", "", f"{'group':>6} {'n_test':>7} {'accuracy':>9}"]
    for f in report["folds"]:
        lines.append(f"{f['group']:>6} {f['n_test']:>7} {f['accuracy']:>9.4f}")
    lines += ["", f"mean accuracy: {report['mean_accuracy']:.4f}", "", "confusion (rows = true, cols = predicted):"]
    labels = report["labels"]
    width = max(len(lab) for lab in labels) + 2
    lines.append(" " * width + "".join(f"{lab:>{width}}" for lab in labels))
    for lab, row in zip(labels, report["confusion_matrix"]):
        lines.append(f"{lab:>{width}}" + "".join(f"{v:>{width}}" for v in row))
    return "\n".join(lines) + "\n"


def file_checksums(directory, pattern="*.tsf") -> dict:
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(Path(directory).glob(pattern))}
