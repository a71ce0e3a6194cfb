# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled scanner for the BER-encoded GOOSE APDU.

Hot path of frame decoding when ingesting large captures; must stay
behaviourally identical to goosewatch._scan_py.scan_apdu.
"""


cdef Py_ssize_t _read_length(const unsigned char[:] buf, Py_ssize_t pos,
                             Py_ssize_t limit, Py_ssize_t *out_len) except -1:
    cdef unsigned char first
    cdef Py_ssize_t n, i
    cdef unsigned long long value = 0
    if pos >= limit:
        raise ValueError("truncated length octet")
    first = buf[pos]
    pos += 1
    if first < 0x80:
        out_len[0] = first
        return pos
    n = first & 0x7F
    if n == 0:
        raise ValueError("indefinite length not allowed")
    if n > 8:
        raise ValueError("length field too wide")
    if pos + n > limit:
        raise ValueError("truncated long-form length")
    for i in range(n):
        value = (value << 8) | buf[pos + i]
    if value > 0x7FFFFFFF:
        raise ValueError("length field too wide")
    out_len[0] = <Py_ssize_t> value
    return pos + n


cdef unsigned long long _read_uint(const unsigned char[:] buf, Py_ssize_t pos,
                                   Py_ssize_t end) except? 0xFFFFFFFFFFFFFFFF:
    cdef Py_ssize_t width = end - pos
    cdef Py_ssize_t i
    cdef unsigned long long value = 0
    if width == 0:
        raise ValueError("empty INTEGER")
    if width > 8:
        raise ValueError("INTEGER too wide")
    for i in range(pos, end):
        value = (value << 8) | buf[i]
    return value


def scan_apdu(bytes data, Py_ssize_t start, Py_ssize_t end):
    """Scan one goosePdu TLV located at ``data[start:end]``.

    Same contract as goosewatch._scan_py.scan_apdu.
    """
    cdef const unsigned char[:] buf = data
    cdef Py_ssize_t pos, apdu_end, vpos, vend
    cdef Py_ssize_t length = 0, vlen = 0
    cdef unsigned char tag

    if start >= end or buf[start] != 0x61:
        raise ValueError("missing goosePdu tag 0x61")
    pos = _read_length(buf, start + 1, end, &length)
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
        vpos = _read_length(buf, pos + 1, apdu_end, &vlen)
        vend = vpos + vlen
        if vend > apdu_end:
            raise ValueError("field length overruns goosePdu")
        if tag == 0x80:
            gocb_ref = data[vpos:vend]
        elif tag == 0x81:
            ttl_ms = _read_uint(buf, vpos, vend)
        elif tag == 0x82:
            dat_set = data[vpos:vend]
        elif tag == 0x83:
            go_id = data[vpos:vend]
        elif tag == 0x84:
            if vlen != 8:
                raise ValueError("UtcTime must be 8 octets")
            event_ts = data[vpos:vend]
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
        elif tag == 0xAB:
            all_data = data[vpos:vend]
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
