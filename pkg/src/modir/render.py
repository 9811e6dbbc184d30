"""Rendering of UI-facing assets: warped images, quiver overlays, scatter data.

Overlays draw the displacement field as a subsampled arrow grid on top of
the source image; arrow color encodes displacement magnitude (the 2D stand-
in for the out-of-plane component of the published figures).
"""

from __future__ import annotations

import numpy as np

ARROW_STRIDE = 4
OVERLAY_ZOOM = 4


def _magnitude_color(t: float) -> tuple[int, int, int]:
    """Blue (small) -> yellow -> red (large), t in [0,1]."""
    t = float(np.clip(t, 0.0, 1.0))
    if t < 0.5:
        s = t * 2.0
        return (int(60 + 195 * s), int(90 + 165 * s), int(220 - 160 * s))
    s = (t - 0.5) * 2.0
    return (255, int(255 - 215 * s), int(60 - 40 * s))


def overlay_quiver(source_image: np.ndarray, dvf: np.ndarray, stride: int = ARROW_STRIDE, zoom: int = OVERLAY_ZOOM) -> np.ndarray:
    """RGB uint8 overlay of the DVF arrow grid on the source image."""
    from PIL import Image, ImageDraw

    img = np.asarray(source_image, dtype=float)
    while img.ndim > 2:
        img = img[0]
    u = np.asarray(dvf)
    if u.ndim == 4:
        u = u[0]
    h, w = img.shape
    base = Image.fromarray(np.clip(np.round(img * 255), 0, 255).astype(np.uint8), mode="L")
    base = base.resize((w * zoom, h * zoom), Image.NEAREST).convert("RGB")
    draw = ImageDraw.Draw(base)
    mags = np.sqrt(u[0] ** 2 + u[1] ** 2)
    max_mag = max(mags.max(), 1e-9)
    half = stride // 2
    for y in range(half, h, stride):
        for x in range(half, w, stride):
            ux, uy = u[0, y, x], u[1, y, x]
            mag = mags[y, x]
            if mag < 0.05:
                continue
            color = _magnitude_color(mag / max_mag)
            x0, y0 = (x + 0.5) * zoom, (y + 0.5) * zoom
            x1, y1 = x0 + ux * zoom, y0 + uy * zoom
            draw.line([(x0, y0), (x1, y1)], fill=color, width=1)
            # arrow head: two short back-strokes
            ang = np.arctan2(y1 - y0, x1 - x0)
            for da in (2.6, -2.6):
                hx = x1 + 3.0 * np.cos(ang + da)
                hy = y1 + 3.0 * np.sin(ang + da)
                draw.line([(x1, y1), (hx, hy)], fill=color, width=1)
    return np.asarray(base)


def scatter_payload(approx_set, weights_field, files_by_solution, pre_tre: float, pair_id: str) -> dict:
    """scatter.json body for one evaluated pair.

    ``weights_field`` is either the string "dynamic" or a list of weight
    triples; ``files_by_solution`` maps solution id -> {warped, overlay, dvf}
    relative paths.
    """
    solutions = []
    for sol in approx_set.solutions:
        entry = {
            "id": sol.solution_id,
            "losses": [float(v) for v in sol.losses],
            "weights": weights_field if isinstance(weights_field, str) else list(weights_field[sol.solution_id]),
            "tre": float(sol.mean_tre),
            "folding_pct": float(sol.folding_pct),
            "dice_pct": float(sol.dice_pct),
            "files": files_by_solution[sol.solution_id],
        }
        solutions.append(entry)
    return {
        "schema_version": 1,
        "pair": pair_id,
        "ref_point": [float(v) for v in approx_set.ref_point],
        "pre_tre": float(pre_tre),
        "solutions": solutions,
    }
