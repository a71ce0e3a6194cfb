"""Per-window feature vectors over two disjoint views, and matrix assembly.

The 14 features split into the temporal view (timing/volume, continuous)
and the sequence view (protocol counter evolution, event-based):

    temp: dt_mean dt_std rate_mean pkt_count jitter_mean jitter_std
          len_mean ttl_mean
    seq:  st_changes sq_resets sq_bigjump sq_progress st_jump_size_max
          bad_dst_rate

Counter features are computed over consecutive frame pairs, including the
pair that crosses into the window from the previous frame of the same flow
(a suppression gap then shows up as sq_bigjump in the window holding the
frame after the gap). sq_progress is the sqNum range over the window's own
frames. Pairs whose stNum changed are excluded from sq_resets/sq_bigjump
because sqNum legitimately restarts on a state transition.

Missing values: an empty window keeps pkt_count=0 and zeros for the
counter features, with the remaining temporal features and bad_dst_rate
marked missing. Assembly fills temporal gaps by linear interpolation over
adjacent windows of the same flow (nearest value at the edges, matrix
column mean when a flow never observed the feature) and zero-fills
bad_dst_rate.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from goosewatch.windows import FlowWindow

TEMP_COLUMNS = (
    "dt_mean",
    "dt_std",
    "rate_mean",
    "pkt_count",
    "jitter_mean",
    "jitter_std",
    "len_mean",
    "ttl_mean",
)
SEQ_COLUMNS = (
    "st_changes",
    "sq_resets",
    "sq_bigjump",
    "sq_progress",
    "st_jump_size_max",
    "bad_dst_rate",
)
FEATURE_COLUMNS = TEMP_COLUMNS + SEQ_COLUMNS
VIEWS = ("temp", "seq")
META_COLUMNS = ("flow", "t_start", "t_w", "label")

MIN_DT = 1e-6  # clamp for rate_mean inverses
DEGENERATE_VARIANCE = 1e-12


def view_indices(view: str) -> np.ndarray:
    if view == "temp":
        return np.arange(0, len(TEMP_COLUMNS))
    if view == "seq":
        return np.arange(len(TEMP_COLUMNS), len(FEATURE_COLUMNS))
    raise ValueError(f"unknown view {view!r}")


def view_columns(view: str) -> tuple[str, ...]:
    return TEMP_COLUMNS if view == "temp" else SEQ_COLUMNS


def extract_temporal(w: FlowWindow) -> np.ndarray:
    """Temporal sub-vector; NaN marks a missing value."""
    out = np.full(len(TEMP_COLUMNS), np.nan)
    dt = np.asarray(w.dt_series, dtype=float)
    if dt.size:
        out[0] = dt.mean()
        out[1] = dt.std()
        out[2] = np.mean(1.0 / np.maximum(dt, MIN_DT))
    jit = np.asarray(w.jitter_series, dtype=float)
    if jit.size:
        out[4] = jit.mean()
        out[5] = jit.std()
    out[3] = len(w.frames)
    if w.frames:
        out[6] = float(np.mean([f.frame_len for f in w.frames]))
        out[7] = float(np.mean([f.ttl_ms for f in w.frames]))
    return out


def extract_sequence(w: FlowWindow) -> np.ndarray:
    """Sequence sub-vector; only bad_dst_rate can be missing (empty window)."""
    out = np.zeros(len(SEQ_COLUMNS))
    chain = ([w.prev_frame] if w.prev_frame is not None else []) + w.frames
    if len(chain) >= 2:
        st = np.array([f.st_num for f in chain], dtype=np.int64)
        sq = np.array([f.sq_num for f in chain], dtype=np.int64)
        d_st = np.diff(st)
        d_sq = np.diff(sq)
        same_st = d_st == 0
        out[0] = int((d_st > 0).sum())
        out[1] = int(((d_sq < 0) & same_st).sum())
        out[2] = int(((d_sq > 1) & same_st).sum())
        out[4] = max(int(d_st.max()), 0)
    if w.frames:
        win_sq = np.array([f.sq_num for f in w.frames], dtype=np.int64)
        out[3] = int(win_sq.max() - win_sq.min())
        unicast = sum(1 for f in w.frames if not f.dst_mac[0] & 1)
        out[5] = unicast / len(w.frames)
    else:
        out[5] = np.nan
    return out


@dataclass
class FeatureMatrix:
    """Dense N x 14 matrix plus per-row window metadata."""

    X: np.ndarray
    flow: list[str]
    t_start: np.ndarray
    t_w: np.ndarray
    label: list[str]
    degenerate: list[bool] | None = None
    columns: tuple[str, ...] = field(default=FEATURE_COLUMNS)

    def __len__(self) -> int:
        return self.X.shape[0]

    def view_slice(self, view: str) -> np.ndarray:
        return self.X[:, view_indices(view)]


def assemble(windows, scope: str = "infer") -> FeatureMatrix:
    """Extract both views for every window and fill gaps into a dense matrix.

    ``scope="train"`` additionally flags degenerate (near-constant) columns;
    they stay in the matrix so the column layout is stable between training
    and inference, and the scaler neutralizes them with a unit divisor.
    """
    if scope not in ("train", "infer"):
        raise ValueError(f"scope must be 'train' or 'infer', got {scope!r}")
    ws = sorted(windows, key=lambda w: (w.key.goose_id, w.key.src_mac, w.t_start))
    n = len(ws)
    X = np.empty((n, len(FEATURE_COLUMNS)))
    for i, w in enumerate(ws):
        X[i, : len(TEMP_COLUMNS)] = extract_temporal(w)
        X[i, len(TEMP_COLUMNS):] = extract_sequence(w)

    keep = ~np.all(np.isnan(X), axis=1)
    X = X[keep]
    ws = [w for w, k in zip(ws, keep) if k]

    flow = [str(w.key) for w in ws]
    t_start = np.array([w.t_start for w in ws])
    t_w = np.array([w.t_w for w in ws])
    label = [w.label for w in ws]

    # flow-consistent interpolation for continuous (temporal) features
    bounds = [0] + [i for i in range(1, len(ws)) if flow[i] != flow[i - 1]] + [len(ws)]
    for lo, hi in zip(bounds, bounds[1:]):
        t = t_start[lo:hi]
        for c in range(len(TEMP_COLUMNS)):
            col = X[lo:hi, c]
            miss = np.isnan(col)
            if miss.any() and not miss.all():
                col[miss] = np.interp(t[miss], t[~miss], col[~miss])

    # event-based features are zero-filled
    bad = FEATURE_COLUMNS.index("bad_dst_rate")
    X[np.isnan(X[:, bad]), bad] = 0.0

    # flows that never observed a feature fall back to the matrix column mean
    for c in range(X.shape[1]):
        miss = np.isnan(X[:, c])
        if miss.any():
            X[miss, c] = X[~miss, c].mean() if not miss.all() else 0.0

    degenerate = None
    if scope == "train":
        if X.shape[0]:
            degenerate = [bool(v) for v in X.var(axis=0) < DEGENERATE_VARIANCE]
        else:
            degenerate = [False] * X.shape[1]

    return FeatureMatrix(X=X, flow=flow, t_start=t_start, t_w=t_w, label=label,
                         degenerate=degenerate)


# ---------------------------------------------------------------------------
# Persistence: CSV with meta columns then the 14 features, plus a JSON
# sidecar (same path with .meta.json suffix) for view tags and degeneracy.
# ---------------------------------------------------------------------------


def sidecar_path(path) -> Path:
    return Path(str(path) + ".meta.json")


def save_matrix(fm: FeatureMatrix, path, header_lines=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(line + "\n")
        writer = csv.writer(fh)
        writer.writerow(list(META_COLUMNS) + list(FEATURE_COLUMNS))
        for i in range(len(fm)):
            row = [
                fm.flow[i],
                repr(float(fm.t_start[i])),
                repr(float(fm.t_w[i])),
                fm.label[i],
            ]
            row += [repr(float(v)) for v in fm.X[i]]
            writer.writerow(row)
    meta = {
        "columns": list(FEATURE_COLUMNS),
        "views": {"temp": list(TEMP_COLUMNS), "seq": list(SEQ_COLUMNS)},
        "degenerate": fm.degenerate,
    }
    with open(sidecar_path(path), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_matrix(path) -> FeatureMatrix:
    flow: list[str] = []
    t_start: list[float] = []
    t_w: list[float] = []
    label: list[str] = []
    rows: list[list[float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(reader, None)
        expected = list(META_COLUMNS) + list(FEATURE_COLUMNS)
        if header != expected:
            raise ValueError(f"{path}: unexpected feature CSV header")
        for row in reader:
            if not row:
                continue
            flow.append(row[0])
            t_start.append(float(row[1]))
            t_w.append(float(row[2]))
            label.append(row[3])
            rows.append([float(v) for v in row[4:]])
    degenerate = None
    sc = sidecar_path(path)
    if sc.exists():
        with open(sc) as fh:
            degenerate = json.load(fh).get("degenerate")
    X = np.array(rows) if rows else np.empty((0, len(FEATURE_COLUMNS)))
    return FeatureMatrix(
        X=X,
        flow=flow,
        t_start=np.array(t_start),
        t_w=np.array(t_w),
        label=label,
        degenerate=degenerate,
    )
