"""Pure-Python scanner for the BER-encoded GOOSE APDU.

Behaviourally identical to the compiled kernel in ``goosewatch._scan_c``;
``goosewatch._scan`` picks one of the two at import time. Every structural
violation raises ValueError, which the codec layer converts to Malformed.
Only classic definite lengths are accepted; the indefinite form (0x80) is
rejected outright.
"""

from __future__ import annotations

_TAG_APDU = 0x61
_TAG_ALL_DATA = 0xAB


def _read_length(buf: bytes, pos: int, limit: int) -> tuple[int, int]:
    if pos >= limit:
        raise ValueError("truncated length octet")
    first = buf[pos]
    pos += 1
    if first < 0x80:
        return first, pos
    n = first & 0x7F
    if n == 0:
        raise ValueError("indefinite length not allowed")
    if n > 8:
        raise ValueError("length field too wide")
    if pos + n > limit:
        raise ValueError("truncated long-form length")
    value = 0
    for i in range(n):
        value = (value << 8) | buf[pos + i]
    return value, pos + n


def _read_uint(buf: bytes, pos: int, end: int) -> int:
    width = end - pos
    if width == 0:
        raise ValueError("empty INTEGER")
    if width > 8:
        raise ValueError("INTEGER too wide")
    value = 0
    for i in range(pos, end):
        value = (value << 8) | buf[i]
    return value


def scan_apdu(buf: bytes, start: int, end: int) -> tuple:
    """Scan one goosePdu TLV located at ``buf[start:end]``.

    Returns a 13-tuple::

        (gocb_ref, ttl_ms, dat_set, go_id, event_ts, st_num, sq_num,
         test, conf_rev, nds_com, num_entries, all_data, next_offset)

    String-valued fields come back as raw bytes; any absent field is None.
    Unknown tags inside the PDU are skipped without error.
    """
    if start >= end or buf[start] != _TAG_APDU:
        raise ValueError("missing goosePdu tag 0x61")
    length, pos = _read_length(buf, start + 1, end)
    apdu_end = pos + length
    if apdu_end > end:
        raise ValueError("goosePdu length overruns buffer")

    gocb_ref = dat_set = go_id = event_ts = all_data = None
    ttl_ms = st_num = sq_num = conf_rev = num_entries = None
    test = nds_com = None

    while pos < apdu_end:
        tag = buf[pos]
        if tag & 0x1F == 0x1F:
            raise ValueError("multi-byte tag inside goosePdu")
        vlen, vpos = _read_length(buf, pos + 1, apdu_end)
        vend = vpos + vlen
        if vend > apdu_end:
            raise ValueError("field length overruns goosePdu")
        if tag == 0x80:
            gocb_ref = buf[vpos:vend]
        elif tag == 0x81:
            ttl_ms = _read_uint(buf, vpos, vend)
        elif tag == 0x82:
            dat_set = buf[vpos:vend]
        elif tag == 0x83:
            go_id = buf[vpos:vend]
        elif tag == 0x84:
            if vlen != 8:
                raise ValueError("UtcTime must be 8 octets")
            event_ts = buf[vpos:vend]
        elif tag == 0x85:
            st_num = _read_uint(buf, vpos, vend)
        elif tag == 0x86:
            sq_num = _read_uint(buf, vpos, vend)
        elif tag == 0x87:
            if vlen != 1:
                raise ValueError("BOOLEAN must be 1 octet")
            test = buf[vpos] != 0
        elif tag == 0x88:
            conf_rev = _read_uint(buf, vpos, vend)
        elif tag == 0x89:
            if vlen != 1:
                raise ValueError("BOOLEAN must be 1 octet")
            nds_com = buf[vpos] != 0
        elif tag == 0x8A:
            num_entries = _read_uint(buf, vpos, vend)
        elif tag == _TAG_ALL_DATA:
            all_data = buf[vpos:vend]
        pos = vend

    return (
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
    )
