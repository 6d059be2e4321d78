# Copyright 2026 The BoxSAM-CPP Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Stand-alone NumPy reference for the COD metrics.

Computes each metric straight from its per-pixel definition (explicit
bias-centred maps for E, block statistics for S) and freezes the results in
tests/fixtures/metric_fixtures.json. Regenerate with:

    python3 tests/reference/metric_reference.py
"""

import json
import pathlib

import numpy as np

EPS = np.finfo(np.float64).eps


def mae(pred, gt):
    return float(np.mean(np.abs(pred - gt)))


def f_adaptive(pred, gt, beta2=0.3):
    thr = min(2.0 * pred.mean(), 1.0)
    binary = (pred >= thr) & (pred > 0)
    tp = np.count_nonzero(binary & (gt > 0.5))
    if tp == 0:
        return 0.0
    precision = tp / np.count_nonzero(binary)
    recall = tp / np.count_nonzero(gt > 0.5)
    return float((1 + beta2) * precision * recall / (beta2 * precision + recall))


def _s_object(values):
    if values.size == 0:
        return 0.0
    x = values.mean()
    sigma = values.std(ddof=1) if values.size > 1 else 0.0
    return 2 * x / (x * x + 1 + sigma + EPS)


def _object(pred, gt):
    fg = gt > 0.5
    u = fg.mean()
    return u * _s_object(pred[fg]) + (1 - u) * _s_object(1 - pred[~fg])


def _ssim(pred, gt):
    n = pred.size
    x, y = pred.mean(), gt.mean()
    if n > 1:
        sx = ((pred - x) ** 2).sum() / (n - 1)
        sy = ((gt - y) ** 2).sum() / (n - 1)
        sxy = ((pred - x) * (gt - y)).sum() / (n - 1)
    else:
        sx = sy = sxy = 0.0
    a = 4 * x * y * sxy
    b = (x * x + y * y) * (sx + sy)
    if a != 0:
        return a / (b + EPS)
    return 1.0 if b == 0 else 0.0


def _region(pred, gt):
    h, w = gt.shape
    ys, xs = np.nonzero(gt > 0.5)
    cy = int(np.round(ys.mean())) + 1
    cx = int(np.round(xs.mean())) + 1
    area = h * w
    w1 = cx * cy / area
    w2 = (w - cx) * cy / area
    w3 = cx * (h - cy) / area
    w4 = 1 - w1 - w2 - w3
    score = 0.0
    for weight, (r0, r1, c0, c1) in (
        (w1, (0, cy, 0, cx)),
        (w2, (0, cy, cx, w)),
        (w3, (cy, h, 0, cx)),
        (w4, (cy, h, cx, w)),
    ):
        if r1 > r0 and c1 > c0:
            score += weight * _ssim(pred[r0:r1, c0:c1], gt[r0:r1, c0:c1])
    return score


def s_measure(pred, gt, alpha=0.5):
    y = (gt > 0.5).mean()
    if y == 0:
        s = 1 - pred.mean()
    elif y == 1:
        s = pred.mean()
    else:
        s = alpha * _object(pred, gt) + (1 - alpha) * _region(pred, gt)
    return float(min(max(s, 0.0), 1.0))


def _enhanced(binary, gt):
    n = gt.size
    if gt.sum() == 0:
        return float((n - binary.sum()) / n)
    if gt.sum() == n:
        return float(binary.sum() / n)
    phi_p = binary - binary.mean()
    phi_g = gt - gt.mean()
    align = 2 * phi_p * phi_g / (phi_p ** 2 + phi_g ** 2 + EPS)
    return float((((align + 1) ** 2) / 4).mean())


def e_measure(pred, gt, thresholds=256):
    scores = [_enhanced((pred > k / thresholds).astype(np.float64), gt) for k in range(thresholds)]
    return float(min(max(np.mean(scores), 0.0), 1.0))


def dice_iou(pred, gt, thr=0.5):
    p = pred > thr
    g = gt > 0.5
    inter = np.count_nonzero(p & g)
    ps, gs = np.count_nonzero(p), np.count_nonzero(g)
    if ps + gs == 0:
        return 1.0, 1.0
    return 2 * inter / (ps + gs), inter / (ps + gs - inter)


def _blob(rng, h, w):
    yy, xx = np.mgrid[0:h, 0:w]
    cy, cx = rng.uniform(0.3 * h, 0.7 * h), rng.uniform(0.3 * w, 0.7 * w)
    ry, rx = rng.uniform(0.15 * h, 0.3 * h), rng.uniform(0.15 * w, 0.3 * w)
    return ((((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2) <= 1).astype(np.float64)


def _quantize(a):
    return np.round(np.clip(a, 0, 1) * 255) / 255


def cases():
    rng = np.random.default_rng(20240611)
    out = []
    for i in range(12):
        h, w = int(rng.integers(12, 33)), int(rng.integers(12, 33))
        gt = _blob(rng, h, w)
        kind = i % 4
        if kind == 0:
            pred = _quantize(rng.uniform(0, 1, (h, w)))
        elif kind == 1:
            pred = _quantize(0.8 * gt + 0.2 * rng.uniform(0, 1, (h, w)))
        elif kind == 2:
            pred = _quantize(np.roll(gt, (2, -3), axis=(0, 1)) * rng.uniform(0.5, 1, (h, w)))
        else:
            pred = 1 - gt
        out.append((f"random_{i:02d}", pred, gt))
    h, w = 16, 20
    gt = _blob(rng, h, w)
    out.append(("empty_gt", _quantize(rng.uniform(0, 0.4, (h, w))), np.zeros((h, w))))
    out.append(("full_gt", _quantize(rng.uniform(0.3, 1, (h, w))), np.ones((h, w))))
    out.append(("identical", gt.copy(), gt))
    return out


def main():
    fixtures = []
    for name, pred, gt in cases():
        pred32 = pred.astype(np.float32).astype(np.float64)
        entry = {
            "name": name,
            "height": int(gt.shape[0]),
            "width": int(gt.shape[1]),
            "pred": [float(v) for v in pred32.ravel()],
            "gt": [int(v) for v in gt.ravel()],
            "mae": mae(pred32, gt),
            "s_measure": s_measure(pred32, gt),
            "e_measure": e_measure(pred32, gt),
            "dice": dice_iou(pred32, gt)[0],
            "iou": dice_iou(pred32, gt)[1],
        }
        entry["f_adaptive"] = f_adaptive(pred32, gt) if gt.sum() > 0 else None
        fixtures.append(entry)
    path = pathlib.Path(__file__).resolve().parents[1] / "fixtures" / "metric_fixtures.json"
    path.write_text(json.dumps({"generator": "tests/reference/metric_reference.py", "cases": fixtures}, indent=1))
    print(f"wrote {len(fixtures)} cases to {path}")


if __name__ == "__main__":
    main()
