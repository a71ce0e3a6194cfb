"""Protocol-faithful synthetic GOOSE traffic plus attack injection.

Publishers follow the standard retransmission discipline: heartbeats at
t_max with sqNum incrementing, and on each (Poisson) state event stNum
increments, sqNum resets to zero and the retransmission interval restarts
at t_min, doubling until it is capped at t_max again. timeAllowedToLive
advertises ttl_factor times the nominal interval to the next frame, and
every gap is perturbed by +-2 % uniform jitter. Generation is fully
deterministic per seed.

Three attack injectors mirror the detected classes: message suppression
(drop victim frames inside the interval), data manipulation (interleave
forged frames carrying the victim's identity with a jumped stNum, restarted
sqNum and mutated payload), and denial of service (flood frames from an
attacker identity at a fixed rate). Each injector returns the modified
frame sequence plus the ground-truth label interval.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field

import numpy as np

from goosewatch import codec
from goosewatch.codec import GooseFrame

TIMING_JITTER = 0.02  # +-2 % uniform perturbation of every gap

DEFAULT_DST = "01:0c:cd:01:00:01"


class ScenarioError(ValueError):
    """Scenario file is structurally or semantically invalid."""


@dataclass
class PublisherSpec:
    go_id: str
    gocb_ref: str
    src_mac: bytes
    dst_mac: bytes = field(default_factory=lambda: codec.parse_mac(DEFAULT_DST))
    t_min_ms: float = 4.0
    t_max_ms: float = 1000.0
    ttl_factor: float = 2.0
    event_rate: float = 0.0
    frame_len_base: int = 140
    seed: int = 0
    appid: int = 0x0001
    dat_set: str = ""
    conf_rev: int = 1

    def __post_init__(self):
        if self.t_min_ms <= 0 or self.t_min_ms > self.t_max_ms:
            raise ScenarioError(
                f"{self.go_id}: need 0 < t_min_ms <= t_max_ms, "
                f"got {self.t_min_ms}/{self.t_max_ms}"
            )
        if not self.dst_mac[0] & 1:
            raise ScenarioError(f"{self.go_id}: dst_mac must be multicast")


@dataclass
class AttackSpec:
    kind: str
    start: float
    duration: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("MS", "DM", "DoS"):
            raise ScenarioError(f"unknown attack kind {self.kind!r}")
        if self.duration < 0:
            raise ScenarioError("attack duration must be >= 0")

    @property
    def end(self) -> float:
        return self.start + self.duration


def _utc_time(ts: float) -> bytes:
    """IEC UtcTime: 4 octets of epoch seconds, 3 of binary fraction, 1 of
    time quality."""
    sec = int(ts)
    frac = int((ts - sec) * (1 << 24)) & 0xFFFFFF
    return sec.to_bytes(4, "big") + frac.to_bytes(3, "big") + b"\x18"


def _all_data(st_num: int, filler: int) -> bytes:
    payload = bytes([0x83, 1, st_num & 1, 0x85, 1, st_num & 0xFF])
    if filler > 0:
        filler = min(filler, 120)
        payload += bytes([0x89, filler]) + bytes(filler)
    return payload


def _publisher_frames(spec: PublisherSpec, span: float) -> list[GooseFrame]:
    rng = np.random.default_rng(spec.seed)
    t_min = spec.t_min_ms / 1e3
    t_max = spec.t_max_ms / 1e3

    events: list[float] = []
    if spec.event_rate > 0:
        t = rng.exponential(1.0 / spec.event_rate)
        while t < span:
            events.append(t)
            t += rng.exponential(1.0 / spec.event_rate)
    events.append(float("inf"))

    # size the payload filler so encoded frames hit frame_len_base; iterate
    # because BER length octets grow at the short/long-form boundary
    probe = _make_frame(spec, 0.0, 1, 0, spec.t_max_ms, 0.0, filler=0)
    filler = max(spec.frame_len_base - probe.frame_len - 2, 0)
    for _ in range(4):
        cur = _make_frame(spec, 0.0, 1, 0, spec.t_max_ms, 0.0, filler).frame_len
        delta = spec.frame_len_base - cur
        if delta == 0 or filler + delta < 1:
            break
        filler += delta

    frames: list[GooseFrame] = []
    st_num, sq_num = 1, 0
    state_ts = 0.0
    interval = t_max
    ev_i = 0
    t_next = float(rng.uniform(0.0, t_max))
    while True:
        if events[ev_i] < t_next:
            now = events[ev_i]
            ev_i += 1
            st_num += 1
            sq_num = 0
            state_ts = now
            interval = t_min
        else:
            now = t_next
            if frames:
                sq_num += 1
        if now >= span:
            break
        ttl_ms = max(1, round(spec.ttl_factor * interval * 1e3))
        frames.append(_make_frame(spec, now, st_num, sq_num, ttl_ms, state_ts,
                                  filler))
        gap = interval * (1.0 + TIMING_JITTER * float(rng.uniform(-1.0, 1.0)))
        t_next = now + gap
        interval = min(interval * 2.0, t_max)
    return frames


def _make_frame(spec: PublisherSpec, ts: float, st_num: int, sq_num: int,
                ttl_ms: float, state_ts: float, filler: int) -> GooseFrame:
    draft = GooseFrame(
        ts=ts,
        dst_mac=spec.dst_mac,
        src_mac=spec.src_mac,
        vlan=None,
        appid=spec.appid,
        pdu_len=0,
        gocb_ref=spec.gocb_ref,
        dat_set=spec.dat_set or f"{spec.gocb_ref}$DataSet",
        go_id=spec.go_id,
        ttl_ms=int(ttl_ms),
        event_ts=_utc_time(state_ts),
        st_num=st_num,
        sq_num=sq_num,
        test=False,
        conf_rev=spec.conf_rev,
        nds_com=False,
        num_entries=3 if filler > 0 else 2,
        all_data=_all_data(st_num, filler),
        frame_len=0,
    )
    return codec.with_lengths(draft)


def gen_normal(publishers, span: float):
    """Merge all publishers' steady-state traffic; returns (frames, [])."""
    if span <= 0:
        raise ScenarioError("span must be positive")
    frames: list[GooseFrame] = []
    for spec in publishers:
        frames.extend(_publisher_frames(spec, span))
    frames.sort(key=lambda f: f.ts)
    return frames, []


# ---------------------------------------------------------------------------
# Attack injectors
# ---------------------------------------------------------------------------


def _in_window(frame: GooseFrame, spec: AttackSpec) -> bool:
    return spec.start <= frame.ts < spec.end


def inject_ms(frames, spec: AttackSpec, rng) -> tuple[list[GooseFrame], list]:
    """Suppress victim frames inside the attack window.

    params: drop_fraction (default 1.0), victim_go_id (default: all flows).
    """
    drop_fraction = float(spec.params.get("drop_fraction", 1.0))
    victim = spec.params.get("victim_go_id")
    out = []
    for f in frames:
        if (
            _in_window(f, spec)
            and (victim is None or f.go_id == victim)
            and rng.random() < drop_fraction
        ):
            continue
        out.append(f)
    return out, [(spec.start, spec.end, "MS")]


def inject_dm(frames, spec: AttackSpec, rng) -> tuple[list[GooseFrame], list]:
    """Interleave forged frames that reuse a victim's identity.

    params: victim_go_id (default: first publisher seen in the window),
    rate_pps (default 10), delta_st (default 100), unicast_dst (default
    False; a unicast destination makes the forgery structurally sloppy),
    attacker_mac (used only with unicast_dst).
    """
    rate = float(spec.params.get("rate_pps", 10.0))
    delta_st = int(spec.params.get("delta_st", 100))
    unicast = bool(spec.params.get("unicast_dst", False))
    victim = spec.params.get("victim_go_id")
    if victim is None:
        for f in frames:
            if _in_window(f, spec):
                victim = f.go_id
                break
    labels = [(spec.start, spec.end, "DM")]
    n_forged = int(round(rate * spec.duration))
    if victim is None or n_forged == 0:
        return list(frames), labels

    victim_frames = [f for f in frames if f.go_id == victim]
    if not victim_frames:
        return list(frames), labels
    victim_ts = [f.ts for f in victim_frames]

    times = np.sort(rng.uniform(spec.start, spec.end, size=n_forged))
    forged = []
    for i, ts in enumerate(times):
        base = victim_frames[max(bisect.bisect_right(victim_ts, ts) - 1, 0)]
        payload = bytearray(base.all_data)
        if payload:
            payload[-1] ^= 0xFF
        mutated = codec.with_lengths(
            GooseFrame(
                ts=float(ts),
                dst_mac=(
                    codec.parse_mac(spec.params.get("attacker_mac", "00:11:22:33:44:55"))
                    if unicast
                    else base.dst_mac
                ),
                src_mac=base.src_mac,
                vlan=base.vlan,
                appid=base.appid,
                pdu_len=0,
                gocb_ref=base.gocb_ref,
                dat_set=base.dat_set,
                go_id=base.go_id,
                ttl_ms=base.ttl_ms,
                event_ts=_utc_time(float(ts)),
                st_num=base.st_num + delta_st,
                sq_num=i,
                test=base.test,
                conf_rev=base.conf_rev,
                nds_com=base.nds_com,
                num_entries=base.num_entries,
                all_data=bytes(payload),
                frame_len=0,
            )
        )
        forged.append(mutated)
    merged = sorted(list(frames) + forged, key=lambda f: f.ts)
    return merged, labels


def inject_dos(frames, spec: AttackSpec, rng) -> tuple[list[GooseFrame], list]:
    """Flood frames from an attacker identity during the window.

    params: flood_rate (default 1000 pps), spoof_victim_go_id (default
    None: the flood runs as its own flow with a distinct source MAC),
    attacker_mac, go_id, appid.
    """
    rate = float(spec.params.get("flood_rate", 1000.0))
    spoof = spec.params.get("spoof_victim_go_id")
    labels = [(spec.start, spec.end, "DoS")]
    n_flood = int(round(rate * spec.duration))
    if n_flood == 0:
        return list(frames), labels

    if spoof is not None:
        base = next((f for f in frames if f.go_id == spoof), None)
        if base is None:
            raise ScenarioError(f"DoS spoof target {spoof!r} not in capture")
        src = base.src_mac
        go_id, gocb_ref = base.go_id, base.gocb_ref
        appid, dst = base.appid, base.dst_mac
    else:
        src = codec.parse_mac(spec.params.get("attacker_mac", "02:00:00:00:00:66"))
        go_id = spec.params.get("go_id", "DOS-FLOOD")
        gocb_ref = f"{go_id}/LLN0$GO$flood"
        appid = int(spec.params.get("appid", 0x0BAD))
        dst = codec.parse_mac(DEFAULT_DST)

    times = np.sort(rng.uniform(spec.start, spec.end, size=n_flood))
    flood = []
    for i, ts in enumerate(times):
        flood.append(
            codec.with_lengths(
                GooseFrame(
                    ts=float(ts),
                    dst_mac=dst,
                    src_mac=src,
                    vlan=None,
                    appid=appid,
                    pdu_len=0,
                    gocb_ref=gocb_ref,
                    dat_set=f"{gocb_ref}$DataSet",
                    go_id=go_id,
                    ttl_ms=1000,
                    event_ts=_utc_time(spec.start),
                    st_num=1,
                    sq_num=i,
                    test=False,
                    conf_rev=1,
                    nds_com=False,
                    num_entries=2,
                    all_data=_all_data(1, 0),
                    frame_len=0,
                )
            )
        )
    merged = sorted(list(frames) + flood, key=lambda f: f.ts)
    return merged, labels


_INJECTORS = {"MS": inject_ms, "DM": inject_dm, "DoS": inject_dos}


# ---------------------------------------------------------------------------
# Scenario files
# ---------------------------------------------------------------------------


def load_scenario(path) -> dict:
    with open(path) as fh:
        scenario = json.load(fh)
    if scenario.get("version") != 1:
        raise ScenarioError(f"unsupported scenario version {scenario.get('version')!r}")
    return scenario


def run_scenario(scenario: dict):
    """Generate (frames, labels) for one scenario dictionary."""
    try:
        span = float(scenario["span_s"])
        seed = int(scenario.get("seed", 0))
        pub_dicts = scenario["publishers"]
        attack_dicts = scenario.get("attacks", [])
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"bad scenario structure: {exc}") from exc
    if not pub_dicts:
        raise ScenarioError("scenario needs at least one publisher")

    root = np.random.SeedSequence(seed)
    children = root.spawn(len(pub_dicts) + len(attack_dicts))

    publishers = []
    for i, d in enumerate(pub_dicts):
        d = dict(d)
        try:
            d["src_mac"] = codec.parse_mac(d["src_mac"])
            if "dst_mac" in d:
                d["dst_mac"] = codec.parse_mac(d["dst_mac"])
            if "seed" not in d:
                d["seed"] = int(children[i].generate_state(1)[0])
            publishers.append(PublisherSpec(**d))
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"publisher {i}: {exc}") from exc

    frames, labels = gen_normal(publishers, span)
    for j, d in enumerate(attack_dicts):
        try:
            spec = AttackSpec(
                kind=d["kind"],
                start=float(d["start_s"]),
                duration=float(d["duration_s"]),
                params=d.get("params", {}),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"attack {j}: {exc}") from exc
        if spec.start < 0 or spec.end > span:
            raise ScenarioError(f"attack {j}: window outside capture span")
        rng = np.random.default_rng(children[len(pub_dicts) + j])
        frames, new_labels = _INJECTORS[spec.kind](frames, spec, rng)
        labels.extend(new_labels)
    labels.sort()
    return frames, labels
