"""Classic pcap reading and writing, filtered to GOOSE frames on read.

Only the classic libpcap format is handled (both byte orders, micro- and
nanosecond magics); pcapng must be converted first, e.g. with
``tshark -F pcap``. Nanosecond timestamps are down-quantized to
microseconds on read. Written files are always little-endian microsecond
pcap, link type 1 (Ethernet), snaplen 65535.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

from goosewatch import codec

log = logging.getLogger(__name__)

LINKTYPE_ETHERNET = 1
SNAPLEN = 65535

# raw magic bytes -> (struct byte order, timestamp resolution)
_MAGICS = {
    b"\xa1\xb2\xc3\xd4": (">", "micro"),
    b"\xd4\xc3\xb2\xa1": ("<", "micro"),
    b"\xa1\xb2\x3c\x4d": (">", "nano"),
    b"\x4d\x3c\xb2\xa1": ("<", "nano"),
}


class BadMagic(ValueError):
    """File does not start with a classic pcap magic number."""


class BadLinkType(ValueError):
    """Capture link type is not Ethernet."""


class UnsortedInput(ValueError):
    """Frames handed to write_pcap are not sorted by timestamp."""


class IoError(OSError):
    """Wraps OS-level failures behind a stable name for the CLI."""


@dataclass
class CaptureMeta:
    path: str
    link_type: int
    ts_resolution: str
    frame_count: int
    goose_count: int


class PcapGooseReader:
    """Streaming GOOSE reader over a classic pcap file.

    Iteration yields GooseFrame objects in file order while holding O(1)
    records in memory. Non-GOOSE records are counted and skipped; records
    that claim to be GOOSE but fail to decode are counted, logged and
    skipped. ``meta`` carries the final counts once iteration finishes.
    """

    def __init__(self, source):
        if isinstance(source, (str, Path)):
            try:
                self._fh = open(source, "rb")
            except OSError as exc:
                raise IoError(str(exc)) from exc
            self._own = True
            self._path = str(source)
        else:
            self._fh = source
            self._own = False
            self._path = getattr(source, "name", "<stream>")
        header = self._fh.read(24)
        if len(header) < 24:
            self.close()
            raise BadMagic(f"{self._path}: truncated pcap global header")
        try:
            self._endian, self._resolution = _MAGICS[header[:4]]
        except KeyError:
            self.close()
            raise BadMagic(f"{self._path}: unknown magic {header[:4].hex()}") from None
        link_type = struct.unpack(self._endian + "IHHiIII", header)[6]
        if link_type != LINKTYPE_ETHERNET:
            self.close()
            raise BadLinkType(f"{self._path}: link type {link_type}, need Ethernet (1)")
        self._link_type = link_type
        self._rec = struct.Struct(self._endian + "IIII")
        self._frame_count = 0
        self._goose_count = 0
        self._malformed_count = 0

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    def close(self):
        if self._own:
            self._fh.close()

    @property
    def meta(self) -> CaptureMeta:
        return CaptureMeta(
            path=self._path,
            link_type=self._link_type,
            ts_resolution=self._resolution,
            frame_count=self._frame_count,
            goose_count=self._goose_count,
        )

    def __iter__(self):
        subsec_div = 1 if self._resolution == "micro" else 1000
        while True:
            head = self._fh.read(16)
            if len(head) == 0:
                return
            if len(head) < 16:
                log.warning("%s: truncated record header at EOF", self._path)
                return
            ts_sec, ts_sub, incl_len, _orig_len = self._rec.unpack(head)
            data = self._fh.read(incl_len)
            if len(data) < incl_len:
                log.warning("%s: truncated record body at EOF", self._path)
                return
            self._frame_count += 1
            ts = ts_sec + (ts_sub // subsec_div) / 1e6
            try:
                frame = codec.decode_frame(data, ts)
            except codec.NotGoose:
                continue
            except codec.Malformed as exc:
                self._malformed_count += 1
                log.warning("%s: dropping malformed GOOSE record %d: %s",
                            self._path, self._frame_count, exc)
                continue
            self._goose_count += 1
            yield frame


def read_goose(path) -> tuple[list[codec.GooseFrame], CaptureMeta]:
    """Read all GOOSE frames from a classic pcap file, in file order."""
    with PcapGooseReader(path) as reader:
        frames = list(reader)
        return frames, reader.meta


def write_pcap(frames, path) -> CaptureMeta:
    """Write frames as little-endian microsecond pcap, link type 1.

    Frames must be sorted by timestamp (UnsortedInput otherwise); record
    lengths both equal the encoded frame length.
    """
    try:
        fh = open(path, "wb")
    except OSError as exc:
        raise IoError(str(exc)) from exc
    count = 0
    last_ts = float("-inf")
    with fh:
        fh.write(struct.pack("<IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, SNAPLEN,
                             LINKTYPE_ETHERNET))
        for frame in frames:
            if frame.ts < last_ts:
                raise UnsortedInput(f"frame {count} at ts={frame.ts} after {last_ts}")
            last_ts = frame.ts
            raw = codec.encode_frame(frame)
            usec = round(frame.ts * 1e6)
            sec, usec = divmod(usec, 10**6)
            fh.write(struct.pack("<IIII", sec, usec, len(raw), len(raw)))
            fh.write(raw)
            count += 1
    return CaptureMeta(
        path=str(path),
        link_type=LINKTYPE_ETHERNET,
        ts_resolution="micro",
        frame_count=count,
        goose_count=count,
    )
