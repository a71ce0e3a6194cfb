"""Encoder/decoder for IEC 61850 GOOSE Ethernet frames.

Wire layout handled here::

    dst(6) src(6) [802.1Q tag(4)] 0x88B8 APPID(2) Length(2) res1(2) res2(2) APDU

The Length field counts the eight header octets plus the encoded APDU.
The APDU is a BER goosePdu (application tag 0x61, definite length) whose
fields carry context-specific tags 0x80..0x8A plus 0xAB for allData:

    0x80 gocbRef   0x81 timeAllowedToLive   0x82 datSet      0x83 goID
    0x84 t         0x85 stNum               0x86 sqNum       0x87 test
    0x88 confRev   0x89 ndsCom              0x8A numDatSetEntries
    0xAB allData

Integers are encoded as minimal-length unsigned big-endian octets; the
content octets of allData are treated as opaque bytes (no feature reads
payload values, only frame length). One 802.1Q tag is supported; QinQ and
any non-0x88B8 ethertype classify as NotGoose rather than an error.
"""

from __future__ import annotations

import dataclasses
import struct
from dataclasses import dataclass

from goosewatch._scan import scan_apdu

ETHERTYPE_GOOSE = 0x88B8
ETHERTYPE_VLAN = 0x8100
ETHERTYPE_QINQ = 0x88A8

_UINT32_MAX = 0xFFFFFFFF
_MAX_STRING_OCTETS = 65


class NotGoose(ValueError):
    """Frame is not GOOSE (wrong ethertype, QinQ, or too short to tell)."""


class Malformed(ValueError):
    """Frame claims to be GOOSE but violates the wire contract."""


class FieldOverflow(ValueError):
    """A frame field exceeds its encodable range."""


@dataclass(slots=True)
class Vlan:
    pcp: int
    vid: int


@dataclass(slots=True)
class GooseFrame:
    """One decoded GOOSE message plus its capture timestamp."""

    ts: float
    dst_mac: bytes
    src_mac: bytes
    vlan: Vlan | None
    appid: int
    pdu_len: int
    gocb_ref: str
    dat_set: str
    go_id: str
    ttl_ms: int
    event_ts: bytes
    st_num: int
    sq_num: int
    test: bool
    conf_rev: int
    nds_com: bool
    num_entries: int
    all_data: bytes
    frame_len: int


def format_mac(mac: bytes) -> str:
    return ":".join(f"{b:02x}" for b in mac)


def parse_mac(text: str) -> bytes:
    parts = text.split(":")
    if len(parts) != 6:
        raise ValueError(f"bad MAC address {text!r}")
    return bytes(int(p, 16) for p in parts)


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------


def decode_frame(data: bytes, ts: float = 0.0) -> GooseFrame:
    """Decode one Ethernet frame starting at the destination MAC.

    Raises NotGoose for anything that is not single-tagged GOOSE, and
    Malformed for GOOSE frames that violate the wire contract. Never reads
    past ``data``.
    """
    n = len(data)
    if n < 14:
        raise NotGoose("too short for an Ethernet header")
    dst = data[0:6]
    src = data[6:12]
    (ethertype,) = struct.unpack_from(">H", data, 12)
    offset = 14
    vlan = None
    if ethertype == ETHERTYPE_VLAN:
        if n < 18:
            raise NotGoose("truncated 802.1Q tag")
        (tci, ethertype) = struct.unpack_from(">HH", data, 14)
        vlan = Vlan(pcp=tci >> 13, vid=tci & 0x0FFF)
        offset = 18
    if ethertype == ETHERTYPE_VLAN or ethertype == ETHERTYPE_QINQ:
        raise NotGoose("stacked VLAN tags")
    if ethertype != ETHERTYPE_GOOSE:
        raise NotGoose(f"ethertype 0x{ethertype:04X}")

    if offset + 8 > n:
        raise Malformed("truncated GOOSE header")
    appid, pdu_len, _res1, _res2 = struct.unpack_from(">HHHH", data, offset)
    if pdu_len < 10:
        raise Malformed(f"Length field {pdu_len} below minimum")
    apdu_start = offset + 8
    apdu_len = pdu_len - 8
    if apdu_start + apdu_len > n:
        raise Malformed("APDU truncated")

    try:
        (
            gocb_ref,
            ttl_ms,
            dat_set,
            go_id,
            event_ts,
            st_num,
            sq_num,
            test,
            conf_rev,
            nds_com,
            num_entries,
            all_data,
            apdu_end,
        ) = scan_apdu(data, apdu_start, apdu_start + apdu_len)
    except ValueError as exc:
        raise Malformed(str(exc)) from None
    if apdu_end != apdu_start + apdu_len:
        raise Malformed("goosePdu shorter than the Length field")

    if st_num is None or sq_num is None:
        raise Malformed("missing stNum/sqNum")
    if ttl_ms is None:
        raise Malformed("missing timeAllowedToLive")
    if ttl_ms < 1:
        raise Malformed("timeAllowedToLive must be positive")
    if not go_id and not gocb_ref:
        raise Malformed("missing goID and gocbRef")
    if event_ts is not None and len(event_ts) != 8:
        raise Malformed("UtcTime must be 8 octets")

    return GooseFrame(
        ts=ts,
        dst_mac=dst,
        src_mac=src,
        vlan=vlan,
        appid=appid,
        pdu_len=pdu_len,
        gocb_ref=(gocb_ref or b"").decode("latin-1"),
        dat_set=(dat_set or b"").decode("latin-1"),
        go_id=(go_id or b"").decode("latin-1"),
        ttl_ms=ttl_ms,
        event_ts=event_ts if event_ts is not None else bytes(8),
        st_num=st_num,
        sq_num=sq_num,
        test=bool(test),
        conf_rev=conf_rev if conf_rev is not None else 0,
        nds_com=bool(nds_com),
        num_entries=num_entries if num_entries is not None else 0,
        all_data=all_data if all_data is not None else b"",
        frame_len=n,
    )


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------


def _ber_length(n: int) -> bytes:
    if n < 0x80:
        return bytes([n])
    width = (n.bit_length() + 7) // 8
    return bytes([0x80 | width]) + n.to_bytes(width, "big")


def _tlv(tag: int, content: bytes) -> bytes:
    return bytes([tag]) + _ber_length(len(content)) + content


def _uint_content(value: int) -> bytes:
    return value.to_bytes(max(1, (value.bit_length() + 7) // 8), "big")


def _check_uint(name: str, value: int, maximum: int = _UINT32_MAX) -> int:
    if not 0 <= value <= maximum:
        raise FieldOverflow(f"{name}={value} outside [0, {maximum}]")
    return value


def _check_string(name: str, value: str) -> bytes:
    try:
        raw = value.encode("ascii")
    except UnicodeEncodeError:
        raise FieldOverflow(f"{name} must be ASCII") from None
    if len(raw) > _MAX_STRING_OCTETS:
        raise FieldOverflow(f"{name} longer than {_MAX_STRING_OCTETS} octets")
    return raw


def _encode_apdu(f: GooseFrame) -> bytes:
    if len(f.event_ts) != 8:
        raise FieldOverflow("event_ts must be exactly 8 octets")
    if f.ttl_ms < 1:
        raise FieldOverflow("ttl_ms must be positive")
    body = b"".join(
        (
            _tlv(0x80, _check_string("gocb_ref", f.gocb_ref)),
            _tlv(0x81, _uint_content(_check_uint("ttl_ms", f.ttl_ms))),
            _tlv(0x82, _check_string("dat_set", f.dat_set)),
            _tlv(0x83, _check_string("go_id", f.go_id)),
            _tlv(0x84, f.event_ts),
            _tlv(0x85, _uint_content(_check_uint("st_num", f.st_num))),
            _tlv(0x86, _uint_content(_check_uint("sq_num", f.sq_num))),
            _tlv(0x87, b"\x01" if f.test else b"\x00"),
            _tlv(0x88, _uint_content(_check_uint("conf_rev", f.conf_rev))),
            _tlv(0x89, b"\x01" if f.nds_com else b"\x00"),
            _tlv(0x8A, _uint_content(_check_uint("num_entries", f.num_entries))),
            _tlv(0xAB, f.all_data),
        )
    )
    return _tlv(0x61, body)


def encode_frame(f: GooseFrame) -> bytes:
    """Encode a frame to wire bytes; ``pdu_len``/``frame_len`` are ignored
    and recomputed (see :func:`with_lengths`)."""
    if len(f.dst_mac) != 6 or len(f.src_mac) != 6:
        raise FieldOverflow("MAC addresses must be 6 octets")
    apdu = _encode_apdu(f)
    pdu_len = 8 + len(apdu)
    if pdu_len > 0xFFFF:
        raise FieldOverflow(f"APDU too large ({pdu_len} octets with header)")
    _check_uint("appid", f.appid, 0xFFFF)

    head = bytearray()
    head += f.dst_mac
    head += f.src_mac
    if f.vlan is not None:
        _check_uint("vlan.pcp", f.vlan.pcp, 7)
        _check_uint("vlan.vid", f.vlan.vid, 4095)
        head += struct.pack(">HH", ETHERTYPE_VLAN, (f.vlan.pcp << 13) | f.vlan.vid)
    head += struct.pack(">HHHHH", ETHERTYPE_GOOSE, f.appid, pdu_len, 0, 0)
    return bytes(head) + apdu


def with_lengths(f: GooseFrame) -> GooseFrame:
    """Copy of ``f`` with pdu_len/frame_len set to what encode_frame emits."""
    raw = encode_frame(f)
    offset = 18 if f.vlan is not None else 14
    (pdu_len,) = struct.unpack_from(">H", raw, offset + 2)
    return dataclasses.replace(f, pdu_len=pdu_len, frame_len=len(raw))
