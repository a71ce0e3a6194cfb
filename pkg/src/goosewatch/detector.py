"""Two-view fusion, per-feature attribution, and labeled evaluation.

A window is anomalous when either view's reconstruction error exceeds its
calibrated threshold (logical OR). Attribution decomposes each view's
error into per-feature squared residuals c_j = (x_j - xhat_j)^2, whose sum
equals |F_v| times the view error; normalized shares make windows
comparable. Evaluation follows the usual confusion-matrix metrics per
attack kind, counting windows of that kind as positives and normal windows
as negatives (windows of other attack kinds are left out of the row).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from goosewatch import features as feat
from goosewatch.autoencoder import AeModel
from goosewatch.evt import EvtThreshold
from goosewatch.windows import ATTACK_KINDS, LABEL_NORMAL, LABEL_UNLABELED

REPORT_VIEWS = ("seq", "temp", "fused")


class SchemaMismatch(ValueError):
    """Feature matrix does not match the detector profile."""


@dataclass
class Verdict:
    flow: str
    t_start: float
    t_w: float
    label: str
    e_seq: float
    e_temp: float
    over_seq: bool
    over_temp: bool
    anomalous: bool
    attributions: dict[str, np.ndarray]
    shares: dict[str, np.ndarray]


@dataclass
class EvalRow:
    attack: str
    view: str
    tp: int
    fp: int
    tn: int
    fn: int
    recall: float
    specificity: float
    precision: float
    f1: float
    no_positives: bool = False


@dataclass
class EvalReport:
    rows: list[EvalRow]
    total_windows: int
    normal_windows: int
    fused_fp: int

    @property
    def fp_share_total(self) -> float:
        return self.fused_fp / self.total_windows if self.total_windows else 0.0

    @property
    def fp_share_normal(self) -> float:
        return self.fused_fp / self.normal_windows if self.normal_windows else 0.0


def score(models: dict[str, AeModel], thresholds: dict[str, EvtThreshold],
          fm: feat.FeatureMatrix) -> list[Verdict]:
    """Score every window of ``fm`` against both view models."""
    if tuple(fm.columns) != feat.FEATURE_COLUMNS:
        raise SchemaMismatch("feature matrix columns do not match the registry")
    per_view: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    for view in ("seq", "temp"):
        model = models[view]
        Xv = fm.view_slice(view)
        if Xv.shape[1] != model.dims[0]:
            raise SchemaMismatch(
                f"{view}: model expects {model.dims[0]} columns, matrix has {Xv.shape[1]}"
            )
        Xs = model.scaler.transform(Xv)
        xhat, _, _ = model.forward(Xs)
        c = (Xs - xhat) ** 2
        e = c.mean(axis=1)
        totals = c.sum(axis=1, keepdims=True)
        shares = np.divide(c, totals, out=np.zeros_like(c), where=totals > 0)
        per_view[view] = (e, c, shares)

    e_seq, c_seq, s_seq = per_view["seq"]
    e_temp, c_temp, s_temp = per_view["temp"]
    z_seq = thresholds["seq"].z_star
    z_temp = thresholds["temp"].z_star

    verdicts = []
    for i in range(len(fm)):
        over_seq = bool(e_seq[i] > z_seq)
        over_temp = bool(e_temp[i] > z_temp)
        verdicts.append(
            Verdict(
                flow=fm.flow[i],
                t_start=float(fm.t_start[i]),
                t_w=float(fm.t_w[i]),
                label=fm.label[i],
                e_seq=float(e_seq[i]),
                e_temp=float(e_temp[i]),
                over_seq=over_seq,
                over_temp=over_temp,
                anomalous=over_seq or over_temp,
                attributions={"seq": c_seq[i], "temp": c_temp[i]},
                shares={"seq": s_seq[i], "temp": s_temp[i]},
            )
        )
    return verdicts


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def metrics_from_counts(tp: int, fp: int, tn: int, fn: int) -> dict[str, float]:
    """Recall/specificity/precision/F1 from raw confusion counts; 0/0 -> 0."""
    recall = _ratio(tp, tp + fn)
    specificity = _ratio(tn, tn + fp)
    precision = _ratio(tp, tp + fp)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {
        "recall": recall,
        "specificity": specificity,
        "precision": precision,
        "f1": f1,
    }


def eval_row(attack: str, view: str, tp: int, fp: int, tn: int, fn: int) -> EvalRow:
    m = metrics_from_counts(tp, fp, tn, fn)
    return EvalRow(
        attack=attack,
        view=view,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        recall=m["recall"],
        specificity=m["specificity"],
        precision=m["precision"],
        f1=m["f1"],
        no_positives=(tp + fn) == 0,
    )


def _flag(v: Verdict, view: str) -> bool:
    if view == "seq":
        return v.over_seq
    if view == "temp":
        return v.over_temp
    return v.anomalous


def evaluate(verdicts, positive_kind: str) -> dict[str, EvalRow]:
    """Per-view confusion rows for one attack kind.

    Windows labeled ``positive_kind`` are positives, normal windows are
    negatives, other kinds are excluded. Every verdict must be labeled.
    """
    for v in verdicts:
        if v.label == LABEL_UNLABELED:
            raise ValueError("evaluate requires labeled verdicts")
    rows = {}
    for view in REPORT_VIEWS:
        tp = fp = tn = fn = 0
        for v in verdicts:
            flagged = _flag(v, view)
            if v.label == positive_kind:
                tp += flagged
                fn += not flagged
            elif v.label == LABEL_NORMAL:
                fp += flagged
                tn += not flagged
        rows[view] = eval_row(positive_kind, view, tp, fp, tn, fn)
    return rows


def full_report(verdicts, kinds=ATTACK_KINDS) -> EvalReport:
    rows = []
    for kind in kinds:
        rows.extend(evaluate(verdicts, kind).values())
    normal = [v for v in verdicts if v.label == LABEL_NORMAL]
    fused_fp = sum(v.anomalous for v in normal)
    return EvalReport(
        rows=rows,
        total_windows=len(verdicts),
        normal_windows=len(normal),
        fused_fp=fused_fp,
    )


def format_report(report: EvalReport) -> str:
    """Human-readable metric table."""
    lines = []
    head = (f"{'attack':<8}{'view':<8}{'TP':>7}{'FP':>7}{'TN':>9}{'FN':>7}"
            f"{'recall':>9}{'spec':>9}{'prec':>9}{'F1':>9}")
    lines.append(head)
    lines.append("-" * len(head))
    for r in report.rows:
        note = "  (no positives)" if r.no_positives else ""
        lines.append(
            f"{r.attack:<8}{r.view:<8}{r.tp:>7}{r.fp:>7}{r.tn:>9}{r.fn:>7}"
            f"{r.recall:>9.5f}{r.specificity:>9.5f}{r.precision:>9.5f}"
            f"{r.f1:>9.5f}{note}"
        )
    lines.append("")
    lines.append(
        f"fused false positives: {report.fused_fp} "
        f"({report.fp_share_total:.4%} of all {report.total_windows} windows, "
        f"{report.fp_share_normal:.4%} of {report.normal_windows} normal windows)"
    )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


VERDICT_HEADER = ("flow", "t_start", "t_w", "label", "e_seq", "e_temp",
                  "over_seq", "over_temp", "anomalous")


def save_verdicts(verdicts, path, header_lines=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(line + "\n")
        writer = csv.writer(fh)
        writer.writerow(VERDICT_HEADER)
        for v in verdicts:
            writer.writerow([
                v.flow,
                repr(float(v.t_start)),
                repr(float(v.t_w)),
                v.label,
                repr(float(v.e_seq)),
                repr(float(v.e_temp)),
                int(v.over_seq),
                int(v.over_temp),
                int(v.anomalous),
            ])


def load_verdicts(path) -> list[Verdict]:
    verdicts = []
    with open(path, newline="") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(reader, None)
        if header != list(VERDICT_HEADER):
            raise ValueError(f"{path}: unexpected verdict CSV header")
        for row in reader:
            if not row:
                continue
            verdicts.append(
                Verdict(
                    flow=row[0],
                    t_start=float(row[1]),
                    t_w=float(row[2]),
                    label=row[3],
                    e_seq=float(row[4]),
                    e_temp=float(row[5]),
                    over_seq=bool(int(row[6])),
                    over_temp=bool(int(row[7])),
                    anomalous=bool(int(row[8])),
                    attributions={},
                    shares={},
                )
            )
    return verdicts


def save_attributions(verdicts, path, header_lines=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(line + "\n")
        writer = csv.writer(fh)
        writer.writerow(list(feat.META_COLUMNS) + list(feat.FEATURE_COLUMNS))
        for v in verdicts:
            row = [v.flow, repr(float(v.t_start)), repr(float(v.t_w)), v.label]
            row += [repr(float(x)) for x in v.attributions["temp"]]
            row += [repr(float(x)) for x in v.attributions["seq"]]
            writer.writerow(row)


def save_report(report: EvalReport, path, header_lines=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(line + "\n")
        writer = csv.writer(fh)
        writer.writerow(["attack", "view", "tp", "fp", "tn", "fn", "recall",
                         "specificity", "precision", "f1", "no_positives"])
        for r in report.rows:
            writer.writerow([
                r.attack, r.view, r.tp, r.fp, r.tn, r.fn,
                repr(float(r.recall)), repr(float(r.specificity)),
                repr(float(r.precision)), repr(float(r.f1)),
                int(r.no_positives),
            ])
        fh.write(f"# fused_fp={report.fused_fp}\n")
        fh.write(f"# fp_share_total={repr(float(report.fp_share_total))}\n")
        fh.write(f"# fp_share_normal={repr(float(report.fp_share_normal))}\n")


# ---------------------------------------------------------------------------
# Detector profile: both models plus both thresholds in one JSON file
# ---------------------------------------------------------------------------


def save_profile(models: dict[str, AeModel], thresholds: dict[str, EvtThreshold],
                 t_w: float, path, provenance: dict | None = None) -> None:
    doc = {
        "version": 1,
        "t_w": t_w,
        "provenance": provenance or {},
        "models": {view: m.to_dict() for view, m in models.items()},
        "thresholds": {view: t.to_dict() for view, t in thresholds.items()},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_profile(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != 1:
        raise ValueError(f"unsupported profile version {doc.get('version')!r}")
    models = {view: AeModel.from_dict(d) for view, d in doc["models"].items()}
    thresholds = {
        view: EvtThreshold.from_dict(d) for view, d in doc["thresholds"].items()
    }
    return models, thresholds, doc.get("t_w")
