import numpy as np
import pytest

from goosewatch import codec


def random_frame(rng: np.random.Generator, ts: float = 0.0, **overrides) -> codec.GooseFrame:
    """One random valid frame with consistent pdu_len/frame_len."""

    def rand_str(max_len=20):
        n = int(rng.integers(1, max_len))
        alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_/$"
        return "".join(alphabet[i] for i in rng.integers(0, len(alphabet), n))

    fields = dict(
        ts=ts,
        dst_mac=bytes([0x01, 0x0C, 0xCD, 0x01]) + bytes(rng.integers(0, 256, 2).tolist()),
        src_mac=bytes(rng.integers(0, 256, 6).tolist()),
        vlan=(codec.Vlan(pcp=int(rng.integers(0, 8)), vid=int(rng.integers(0, 4096)))
              if rng.random() < 0.3 else None),
        appid=int(rng.integers(0, 0x10000)),
        pdu_len=0,
        gocb_ref=rand_str(),
        dat_set=rand_str(),
        go_id=rand_str(),
        ttl_ms=int(rng.integers(1, 60001)),
        event_ts=bytes(rng.integers(0, 256, 8).tolist()),
        st_num=int(rng.integers(0, 2**32)),
        sq_num=int(rng.integers(0, 2**32)),
        test=bool(rng.random() < 0.5),
        conf_rev=int(rng.integers(0, 2**32)),
        nds_com=bool(rng.random() < 0.5),
        num_entries=int(rng.integers(0, 100)),
        all_data=bytes(rng.integers(0, 256, int(rng.integers(0, 64))).tolist()),
        frame_len=0,
    )
    fields.update(overrides)
    return codec.with_lengths(codec.GooseFrame(**fields))


def heartbeat_frames(go_id, src_mac, ts_list, st=1, sq0=0, ttl_ms=2000,
                     length_pad=0, dst=b"\x01\x0c\xcd\x01\x00\x01"):
    """Simple deterministic frame run for windowing/feature tests."""
    frames = []
    for i, ts in enumerate(ts_list):
        frames.append(
            codec.with_lengths(
                codec.GooseFrame(
                    ts=ts,
                    dst_mac=dst,
                    src_mac=src_mac,
                    vlan=None,
                    appid=1,
                    pdu_len=0,
                    gocb_ref=f"{go_id}/LLN0$GO$gcb",
                    dat_set=f"{go_id}/LLN0$ds",
                    go_id=go_id,
                    ttl_ms=ttl_ms,
                    event_ts=bytes(8),
                    st_num=st,
                    sq_num=sq0 + i,
                    test=False,
                    conf_rev=1,
                    nds_com=False,
                    num_entries=1,
                    all_data=bytes([0x83, 1, 1]) + bytes(length_pad),
                    frame_len=0,
                )
            )
        )
    return frames


def random_counter_flow(rng, n, go_id="G1", src_mac=b"\x00\x30\xa7\x00\x00\x01",
                        span=12.0):
    """Random flow with protocol-plausible and protocol-violating counter
    evolution, unicast destinations included."""
    import dataclasses

    ts = np.round(np.sort(rng.uniform(0, span, n)), 6).tolist()
    frames = heartbeat_frames(go_id, src_mac, ts)
    st = 1
    sq = int(rng.integers(0, 50))
    out = []
    for f in frames:
        r = rng.random()
        if r < 0.1:
            st += int(rng.integers(1, 5))
            sq = 0
        elif r < 0.2:
            sq += int(rng.integers(2, 30))
        elif r < 0.25 and sq > 0:
            sq -= int(rng.integers(1, sq + 1))
        else:
            sq += 1
        dst = (bytes.fromhex("001122334455") if rng.random() < 0.2
               else f.dst_mac)
        out.append(dataclasses.replace(f, st_num=st, sq_num=sq, dst_mac=dst))
    return out


ACCEPTANCE_LINES: list[str] = []


def record_criterion(line: str) -> None:
    print(line)
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
