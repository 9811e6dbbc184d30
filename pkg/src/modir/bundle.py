"""Persisted run bundles: manifest, per-solution artifacts, integrity checks.

A bundle directory holds a ``manifest.json`` whose ``files`` table maps
every referenced relative path to its SHA-256 checksum; the manifest is
written last via an atomic rename so concurrent readers only ever see a
complete bundle. Numeric payloads round-trip bit-exactly: loss vectors and
metrics live in JSON (shortest-repr doubles), displacement fields in a raw
little-endian float32 raster; only the PNG images are quantized to 8 bits.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1
DVF_MAGIC = b"MODVF1"
DVF_VERSION = 1


class IntegrityError(RuntimeError):
    """A bundle file is missing, truncated, or fails its checksum."""


class SchemaVersionError(RuntimeError):
    """The bundle was written by an unknown schema version."""


def write_dvf_raster(path: Path, dvf: np.ndarray) -> None:
    """Binary DVF: magic, u8 version, u8 ndim, u32 H, u32 W, then float32
    x-displacements row-major followed by y-displacements."""
    u = np.asarray(dvf)
    if u.ndim == 4:
        u = u[0]
    if u.ndim != 3 or u.shape[0] != 2:
        raise ValueError("expected a (2,H,W) displacement field, got %s" % (u.shape,))
    _, h, w = u.shape
    with open(path, "wb") as f:
        f.write(DVF_MAGIC)
        f.write(struct.pack("<BBII", DVF_VERSION, 2, h, w))
        f.write(u[0].astype("<f4").tobytes())
        f.write(u[1].astype("<f4").tobytes())


def read_dvf_raster(path: Path) -> np.ndarray:
    """Read a DVF raster back as (1,2,H,W) float64 (values are the stored
    float32, exactly)."""
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:6] != DVF_MAGIC:
        raise IntegrityError("%s: not a DVF raster" % path)
    version, ndim, h, w = struct.unpack("<BBII", data[6:16])
    if version != DVF_VERSION or ndim != 2:
        raise SchemaVersionError("%s: unsupported raster version %d/ndim %d" % (path, version, ndim))
    expected = 16 + 8 * h * w
    if len(data) != expected:
        raise IntegrityError("%s: expected %d bytes, found %d" % (path, expected, len(data)))
    flat = np.frombuffer(data, dtype="<f4", offset=16)
    u = flat.reshape(2, h, w).astype(np.float64)
    return u[None]


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def save_image_png(path: Path, image: np.ndarray) -> None:
    """8-bit grayscale PNG (lossy quantization of the [0,1] float image)."""
    from PIL import Image

    a = np.asarray(image, dtype=float)
    while a.ndim > 2:
        a = a[0]
    Image.fromarray(np.clip(np.round(a * 255.0), 0, 255).astype(np.uint8), mode="L").save(path)


def load_image_png(path: Path) -> np.ndarray:
    from PIL import Image

    a = np.asarray(Image.open(path).convert("L"), dtype=np.float64) / 255.0
    return a[None, None]


class BundleWriter:
    """Collects files under a directory, then seals them with a manifest."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files: dict[str, str] = {}

    def add(self, rel_path: str) -> None:
        self.files[rel_path] = _sha256(self.root / rel_path)

    def path(self, rel_path: str) -> Path:
        p = self.root / rel_path
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def write_json(self, rel_path: str, payload) -> None:
        p = self.path(rel_path)
        p.write_text(json.dumps(payload, indent=1, sort_keys=True))
        self.add(rel_path)

    def write_dvf(self, rel_path: str, dvf) -> None:
        write_dvf_raster(self.path(rel_path), dvf)
        self.add(rel_path)

    def write_png(self, rel_path: str, image) -> None:
        save_image_png(self.path(rel_path), image)
        self.add(rel_path)

    def seal(self, manifest: dict) -> dict:
        manifest = dict(manifest)
        manifest["schema_version"] = SCHEMA_VERSION
        manifest["files"] = dict(sorted(self.files.items()))
        tmp = self.root / "manifest.json.tmp"
        tmp.write_text(json.dumps(manifest, indent=1, sort_keys=True))
        os.replace(tmp, self.root / "manifest.json")
        return manifest


class Bundle:
    """Read access to a sealed bundle with checksum verification."""

    def __init__(self, root: Path, verify: bool = True):
        self.root = Path(root)
        manifest_path = self.root / "manifest.json"
        if not manifest_path.exists():
            raise IntegrityError("%s: no manifest.json" % self.root)
        self.manifest = json.loads(manifest_path.read_text())
        version = self.manifest.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SchemaVersionError("unknown schema_version %r" % (version,))
        if verify:
            self.verify()

    def verify(self) -> None:
        for rel, digest in self.manifest.get("files", {}).items():
            p = self.root / rel
            if not p.exists():
                raise IntegrityError("%s: missing file %s" % (self.root, rel))
            actual = _sha256(p)
            if actual != digest:
                raise IntegrityError("%s: checksum mismatch for %s" % (self.root, rel))

    def json(self, rel_path: str):
        return json.loads((self.root / rel_path).read_text())

    def dvf(self, rel_path: str) -> np.ndarray:
        return read_dvf_raster(self.root / rel_path)

    def image(self, rel_path: str) -> np.ndarray:
        return load_image_png(self.root / rel_path)


def _pair_dir(i: int) -> str:
    return "pairs/pair_%03d" % i


def _sol_dir(i: int, j: int) -> str:
    return "%s/solutions/sol_%02d" % (_pair_dir(i), j)


def write_run_bundle(params, trace, eval_pairs, outdir, created: str | None = None) -> dict:
    """Persist one training run: originals, per-solution artifacts, metrics,
    the training trace, and a sealed manifest. Returns the manifest."""
    from modir import autodiff as ad
    from modir import metrics as metrics_mod
    from modir import render
    from modir.autodiff import Tensor
    from modir.network import forward_stacked, warp

    config = trace.config
    guidance = config.guidance
    ref = list(config.ref_point)
    writer = BundleWriter(Path(outdir))
    report = metrics_mod.set_report(params, eval_pairs, ref, guidance)
    weights_field = "dynamic" if trace.mode == "mo" else trace.grid_weights

    csv_rows = ["pair,solution,l_image,l_smooth,l_seg,tre,folding_pct,dice_pct"]
    scatter_root = None
    for i, pair in enumerate(eval_pairs):
        pd = _pair_dir(i)
        writer.write_png(f"{pd}/source.png", pair.source_image)
        writer.write_png(f"{pd}/target.png", pair.target_image)
        for k in range(pair.source_mask.shape[1]):
            writer.write_png(f"{pd}/source_mask_{k}.png", pair.source_mask[0, k])
            writer.write_png(f"{pd}/target_mask_{k}.png", pair.target_mask[0, k])
        writer.write_json(
            f"{pd}/landmarks.json",
            {
                "target": pair.target_landmarks.tolist(),
                "source": pair.source_landmarks.tolist(),
            },
        )
        if pair.gt_dvf is not None:
            writer.write_dvf(f"{pd}/gt_dvf.dvf", pair.gt_dvf)

        ad.reset_tape()
        dvfs = forward_stacked(params, Tensor(pair.source_image), Tensor(pair.target_image))
        warped = warp(Tensor(pair.source_image), dvfs)
        warped_masks = warp(Tensor(pair.source_mask), dvfs)
        u = dvfs.data
        warped_np = warped.data
        masks_np = warped_masks.data
        ad.reset_tape()

        approx = report.per_pair[i]
        files_by_solution = {}
        for j in range(config.p):
            sd = _sol_dir(i, j)
            writer.write_png(f"{sd}/warped.png", warped_np[j, 0])
            for k in range(masks_np.shape[1]):
                writer.write_png(f"{sd}/warped_mask_{k}.png", masks_np[j, k] >= 0.5)
            writer.write_dvf(f"{sd}/dvf.dvf", u[j])
            overlay = render.overlay_quiver(pair.source_image, u[j])
            _save_rgb(writer.path(f"{sd}/overlay.png"), overlay)
            writer.add(f"{sd}/overlay.png")
            files_by_solution[j] = {
                "warped": f"{sd}/warped.png",
                "overlay": f"{sd}/overlay.png",
                "dvf": f"{sd}/dvf.dvf",
            }
            sol = approx.solutions[j]
            csv_rows.append(
                "%d,%d,%.17g,%.17g,%s,%.17g,%.17g,%.17g"
                % (
                    i,
                    j,
                    sol.losses[0],
                    sol.losses[1],
                    "%.17g" % sol.losses[2] if len(sol.losses) > 2 else "",
                    sol.mean_tre,
                    sol.folding_pct,
                    sol.dice_pct,
                )
            )
        pre = float(
            np.linalg.norm(pair.source_landmarks - pair.target_landmarks, axis=1).mean()
        )
        payload = render.scatter_payload(approx, weights_field, files_by_solution, pre, pd)
        writer.write_json(f"{pd}/scatter.json", payload)
        if scatter_root is None:
            scatter_root = payload
    writer.write_json("scatter.json", scatter_root)

    writer.write_json(
        "trace.json",
        {
            "mode": trace.mode,
            "records": [
                {
                    "iteration": r.iteration,
                    "hv": r.hv,
                    "loss_vectors": r.loss_vectors.tolist(),
                    "weights": r.weights.tolist(),
                }
                for r in trace.records
            ],
        },
    )
    writer.write_json(
        "metrics.json",
        {
            "hv": report.hv,
            "spread": report.spread,
            "pre_tre": report.pre_tre,
            "min_tre": _sol_json(report.min_tre),
            "max_dice": _sol_json(report.max_dice),
            "mean_set": [_sol_json(s) for s in report.mean_set.solutions],
        },
    )
    writer.path("metrics.csv").write_text("\n".join(csv_rows) + "\n")
    writer.add("metrics.csv")

    manifest = {
        "mode": trace.mode,
        "created": created or _now(),
        "p": config.p,
        "ref_point": ref,
        "guidance": guidance,
        "config": {
            "p": config.p,
            "iterations": config.iterations,
            "lr": config.lr,
            "ref_point": ref,
            "guidance": guidance,
            "share_encoder": config.share_encoder,
            "seed": config.seed,
        },
        "weights": weights_field,
        "solutions": [
            {"id": j, "weights": "dynamic" if weights_field == "dynamic" else list(weights_field[j])}
            for j in range(config.p)
        ],
        "pairs": [_pair_dir(i) for i in range(len(eval_pairs))],
    }
    return writer.seal(manifest)


def _sol_json(sol) -> dict:
    return {
        "id": sol.solution_id,
        "losses": [float(v) for v in sol.losses],
        "tre": float(sol.mean_tre),
        "folding_pct": float(sol.folding_pct),
        "dice_pct": float(sol.dice_pct),
    }


def _now() -> str:
    import datetime

    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _save_rgb(path: Path, rgb: np.ndarray) -> None:
    from PIL import Image

    Image.fromarray(np.asarray(rgb, dtype=np.uint8), mode="RGB").save(path)


def write_genmed_bundle(traces, outdir, created: str | None = None) -> dict:
    """Objective-space traces of the analytic benchmark, one per reference
    point, in a sealed bundle."""
    writer = BundleWriter(Path(outdir))
    entries = []
    for t_idx, t in enumerate(traces):
        rel = "traces/trace_%03d.json" % t_idx
        writer.write_json(
            rel,
            {
                "ref_point": list(t.ref_point),
                "decisions": t.decisions.tolist(),
                "objectives": t.objectives.tolist(),
                "history": [h.tolist() for h in t.history],
            },
        )
        entries.append({"ref_point": list(t.ref_point), "file": rel})
    return writer.seal({"mode": "genmed", "created": created or _now(), "traces": entries})


def load_pair(bundle: Bundle, pair_rel: str):
    """Reassemble a RegistrationPair from bundle files (images are 8-bit
    quantized; masks, landmarks and the ground-truth field are exact)."""
    from modir.network import RegistrationPair

    source = bundle.image(f"{pair_rel}/source.png")
    target = bundle.image(f"{pair_rel}/target.png")
    masks_s, masks_t = [], []
    k = 0
    while f"{pair_rel}/source_mask_{k}.png" in bundle.manifest["files"]:
        masks_s.append(bundle.image(f"{pair_rel}/source_mask_{k}.png")[0, 0])
        masks_t.append(bundle.image(f"{pair_rel}/target_mask_{k}.png")[0, 0])
        k += 1
    lm = bundle.json(f"{pair_rel}/landmarks.json")
    gt_rel = f"{pair_rel}/gt_dvf.dvf"
    gt = bundle.dvf(gt_rel) if gt_rel in bundle.manifest["files"] else None
    pair = RegistrationPair(
        source_image=source,
        target_image=target,
        source_mask=np.stack(masks_s)[None].round(),
        target_mask=np.stack(masks_t)[None].round(),
        target_landmarks=np.asarray(lm["target"], dtype=float),
        source_landmarks=np.asarray(lm["source"], dtype=float),
        gt_dvf=gt,
    )
    return pair
