"""Flow grouping and fixed-length time windows over decoded GOOSE frames.

A flow is one publisher identity: (goID, source MAC), with gocbRef standing
in when goID is absent. Windows are laid per flow on a stride grid anchored
at the flow's first frame. Interior windows with zero frames are emitted
(suppressed communication is evidence); emptiness before the first or after
the last frame of a flow is not invented.

Inter-arrival and jitter series are computed flow-locally across window
boundaries: the last frame before a window seeds the first dt of that
window, so a window holding n frames carries n inter-arrival values unless
it is the first window of its flow (then n-1). Jitter is the absolute
deviation of each dt from the median of up to 5 preceding dt values.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from goosewatch.codec import GooseFrame

LABEL_NORMAL = "normal"
LABEL_UNLABELED = "unlabeled"
ATTACK_KINDS = ("MS", "DM", "DoS")

JITTER_LOOKBACK = 5


class OverlappingIntervals(ValueError):
    """Two attack intervals of the same kind overlap."""


@dataclass(frozen=True)
class FlowKey:
    goose_id: str
    src_mac: bytes

    def __str__(self) -> str:
        return f"{self.goose_id}@{':'.join(f'{b:02x}' for b in self.src_mac)}"


def flow_key(frame: GooseFrame) -> FlowKey:
    return FlowKey(frame.go_id if frame.go_id else frame.gocb_ref, frame.src_mac)


@dataclass
class FlowWindow:
    key: FlowKey
    t_start: float
    t_w: float
    frames: list[GooseFrame]
    prev_frame: GooseFrame | None
    dt_series: np.ndarray
    jitter_series: np.ndarray
    label: str = LABEL_UNLABELED

    @property
    def pkt_count(self) -> int:
        return len(self.frames)


def _jitter(dts: np.ndarray) -> np.ndarray:
    out = np.zeros_like(dts)
    for i in range(1, dts.size):
        lo = max(0, i - JITTER_LOOKBACK)
        out[i] = abs(dts[i] - float(np.median(dts[lo:i])))
    return out


def build_windows(frames, t_w: float, stride: float | None = None) -> list[FlowWindow]:
    """Bucket frames into per-flow windows of length t_w starting every
    ``stride`` seconds (default: tumbling, stride == t_w).

    Grid arithmetic runs in integer microseconds (the capture resolution)
    so window boundaries are exact and no frame can fall between two
    adjacent windows through float rounding.
    """
    if t_w <= 0:
        raise ValueError("t_w must be positive")
    if stride is None:
        stride = t_w
    if not 0 < stride <= t_w:
        raise ValueError("stride must satisfy 0 < stride <= t_w")
    tw_us = round(t_w * 1e6)
    stride_us = round(stride * 1e6)
    if stride_us <= 0 or tw_us <= 0:
        raise ValueError("t_w and stride must be at least 1 microsecond")

    flows: dict[FlowKey, list[GooseFrame]] = {}
    for f in frames:
        flows.setdefault(flow_key(f), []).append(f)

    out: list[FlowWindow] = []
    for key, flow_frames in flows.items():
        flow_frames = sorted(flow_frames, key=lambda fr: fr.ts)
        ts_us = np.array([round(fr.ts * 1e6) for fr in flow_frames], dtype=np.int64)
        dts = np.diff(ts_us) / 1e6
        jit = _jitter(dts)
        t0_us = (int(ts_us[0]) // stride_us) * stride_us
        n_windows = (int(ts_us[-1]) - t0_us) // stride_us + 1
        for k in range(n_windows):
            start_us = t0_us + k * stride_us
            lo = int(np.searchsorted(ts_us, start_us, "left"))
            hi = int(np.searchsorted(ts_us, start_us + tw_us, "left"))
            if lo == hi and not (0 < lo < len(flow_frames)):
                continue
            dlo, dhi = max(lo - 1, 0), max(hi - 1, 0)
            out.append(
                FlowWindow(
                    key=key,
                    t_start=start_us / 1e6,
                    t_w=t_w,
                    frames=flow_frames[lo:hi],
                    prev_frame=flow_frames[lo - 1] if lo > 0 else None,
                    dt_series=dts[dlo:dhi],
                    jitter_series=jit[dlo:dhi],
                )
            )
    out.sort(key=lambda w: (w.key.goose_id, w.key.src_mac, w.t_start))
    return out


def label_windows(windows, intervals) -> list[FlowWindow]:
    """Assign attack labels from (start, end, kind) half-open intervals.

    A window gets kind k when any contained frame timestamp falls in a
    k-interval; an empty window when its span intersects one. Windows
    matching several intervals take the one with the earliest start.
    Remaining windows are labeled normal.
    """
    per_kind: dict[str, list[tuple[float, float]]] = {}
    for start, end, kind in intervals:
        per_kind.setdefault(kind, []).append((start, end))
    for kind, spans in per_kind.items():
        spans.sort()
        for (s1, e1), (s2, _e2) in zip(spans, spans[1:]):
            if s2 < e1:
                raise OverlappingIntervals(f"{kind}: [{s1},{e1}) overlaps [{s2},..)")

    for w in windows:
        hits = []
        for start, end, kind in intervals:
            if w.frames:
                hit = any(start <= fr.ts < end for fr in w.frames)
            else:
                hit = start < w.t_start + w.t_w and w.t_start < end
            if hit:
                hits.append((start, kind))
        w.label = min(hits)[1] if hits else LABEL_NORMAL
    return windows


# ---------------------------------------------------------------------------
# Label sidecar file: CSV with columns start_s,end_s,kind
# ---------------------------------------------------------------------------


def save_intervals(intervals, path, header_lines=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(line + "\n")
        writer = csv.writer(fh)
        writer.writerow(["start_s", "end_s", "kind"])
        for start, end, kind in intervals:
            writer.writerow([repr(float(start)), repr(float(end)), kind])


def load_intervals(path) -> list[tuple[float, float, str]]:
    intervals = []
    with open(path, newline="") as fh:
        rows = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(rows, None)
        if header is not None and header[:3] != ["start_s", "end_s", "kind"]:
            raise ValueError(f"{path}: expected header start_s,end_s,kind")
        for row in rows:
            if not row:
                continue
            intervals.append((float(row[0]), float(row[1]), row[2]))
    return intervals
