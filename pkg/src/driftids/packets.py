"""Packet ingest: classic pcap files and the canonical packet CSV."""

from __future__ import annotations

import csv
import ipaddress
import socket
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator, Optional

from .errors import BadMagic, SchemaMismatch, TruncatedPacket, UnparsableRow, UnsupportedLinkType
from .labels import Label


class Protocol(str, Enum):
    TCP = "TCP"
    UDP = "UDP"
    ICMP = "ICMP"
    OTHER = "OTHER"


_IP_PROTO = {6: Protocol.TCP, 17: Protocol.UDP, 1: Protocol.ICMP}

# TCP flag bits
FIN, SYN, RST, PSH, ACK, URG = 0x01, 0x02, 0x04, 0x08, 0x10, 0x20


@dataclass(frozen=True, slots=True)
class PacketRecord:
    timestamp_us: int
    src_ip: int
    dst_ip: int
    src_port: int
    dst_port: int
    protocol: Protocol
    frame_len: int
    payload_len: int
    tcp_flags: int = 0
    label: Optional[Label] = None

    def __post_init__(self):
        if not 0 <= self.payload_len <= self.frame_len:
            raise ValueError(
                f"payload_len {self.payload_len} outside [0, frame_len={self.frame_len}]"
            )

    @property
    def five_tuple(self):
        return (self.src_ip, self.dst_ip, self.src_port, self.dst_port, self.protocol.value)


def ip_to_int(text: str) -> int:
    return int(ipaddress.IPv4Address(text))


def int_to_ip(value: int) -> str:
    return socket.inet_ntoa(struct.pack("!I", value))


# ---------------------------------------------------------------------------
# pcap

_MAGIC_US = 0xA1B2C3D4
_MAGIC_NS = 0xA1B23C4D
LINKTYPE_ETHERNET = 1

_ETH_IPV4 = 0x0800
_ETH_VLAN = (0x8100, 0x88A8)


class PcapReader:
    """Iterate the IPv4 packets of a classic (non-ng) pcap file.

    Timestamps are yielded as captured; ``read_pcap`` normalizes them.
    ``skipped`` counts frames that were not IPv4 or were too short to
    carry an IPv4 header.
    """

    def __init__(self, path):
        self.path = Path(path)
        self.skipped = 0
        self.read = 0

    def __iter__(self) -> Iterator[PacketRecord]:
        data = self.path.read_bytes()
        if len(data) < 4:
            raise BadMagic(f"{self.path}: file too short for a pcap header")
        magic_le = struct.unpack("<I", data[:4])[0]
        if magic_le in (_MAGIC_US, _MAGIC_NS):
            endian = "<"
        else:
            magic_be = struct.unpack(">I", data[:4])[0]
            if magic_be not in (_MAGIC_US, _MAGIC_NS):
                raise BadMagic(f"{self.path}: magic 0x{magic_le:08X} is not classic pcap")
            endian = ">"
        magic = struct.unpack(endian + "I", data[:4])[0]
        nano = magic == _MAGIC_NS
        if len(data) < 24:
            raise TruncatedPacket(f"{self.path}: global header truncated")
        linktype = struct.unpack(endian + "I", data[20:24])[0] & 0x0FFFFFFF
        if linktype != LINKTYPE_ETHERNET:
            raise UnsupportedLinkType(f"{self.path}: link type {linktype}")

        rec_hdr = struct.Struct(endian + "IIII")
        off = 24
        end = len(data)
        while off < end:
            if end - off < 16:
                raise TruncatedPacket(f"{self.path}: record header at byte {off} truncated")
            ts_sec, ts_frac, incl_len, orig_len = rec_hdr.unpack_from(data, off)
            off += 16
            if incl_len > end - off:
                raise TruncatedPacket(
                    f"{self.path}: record at byte {off - 16} promises {incl_len} bytes, "
                    f"{end - off} remain"
                )
            frame = data[off:off + incl_len]
            off += incl_len
            ts_us = ts_sec * 1_000_000 + (ts_frac // 1000 if nano else ts_frac)
            rec = parse_ethernet(frame, ts_us, max(orig_len, incl_len))
            if rec is None:
                self.skipped += 1
            else:
                self.read += 1
                yield rec


def parse_ethernet(frame: bytes, timestamp_us: int, frame_len: int) -> Optional[PacketRecord]:
    """Decode one Ethernet frame; None when it is not a usable IPv4 packet."""
    if len(frame) < 14:
        return None
    ethertype = struct.unpack_from("!H", frame, 12)[0]
    off = 14
    while ethertype in _ETH_VLAN:
        if len(frame) < off + 4:
            return None
        ethertype = struct.unpack_from("!H", frame, off + 2)[0]
        off += 4
    if ethertype != _ETH_IPV4 or len(frame) < off + 20:
        return None
    ver_ihl = frame[off]
    if ver_ihl >> 4 != 4:
        return None
    ihl = (ver_ihl & 0x0F) * 4
    if ihl < 20:
        return None
    total_len, frag = struct.unpack_from("!H2xH", frame, off + 2)
    proto_num = frame[off + 9]
    src_ip, dst_ip = struct.unpack_from("!II", frame, off + 12)
    protocol = _IP_PROTO.get(proto_num, Protocol.OTHER)

    body = total_len - ihl
    t = off + ihl
    src_port = dst_port = flags = 0
    header = 0
    first_fragment = (frag & 0x1FFF) == 0
    if first_fragment and protocol is Protocol.TCP:
        if len(frame) >= t + 14:
            src_port, dst_port = struct.unpack_from("!HH", frame, t)
            header = (frame[t + 12] >> 4) * 4
            flags = frame[t + 13]
        else:
            header = 20
    elif first_fragment and protocol is Protocol.UDP:
        if len(frame) >= t + 4:
            src_port, dst_port = struct.unpack_from("!HH", frame, t)
        header = 8
    elif first_fragment and protocol is Protocol.ICMP:
        header = 8
    payload = min(max(body - header, 0), frame_len)
    return PacketRecord(
        timestamp_us=timestamp_us,
        src_ip=src_ip,
        dst_ip=dst_ip,
        src_port=src_port,
        dst_port=dst_port,
        protocol=protocol,
        frame_len=frame_len,
        payload_len=payload,
        tcp_flags=flags if protocol is Protocol.TCP else 0,
    )


def normalize_timestamps(records):
    """Shift so the earliest packet sits at t=0 and order by time (stable)."""
    if not records:
        return []
    t0 = min(r.timestamp_us for r in records)
    shifted = [
        r if t0 == 0 else _replace_ts(r, r.timestamp_us - t0)
        for r in records
    ]
    shifted.sort(key=lambda r: r.timestamp_us)
    return shifted


def _replace_ts(r, ts):
    return PacketRecord(ts, r.src_ip, r.dst_ip, r.src_port, r.dst_port, r.protocol,
                        r.frame_len, r.payload_len, r.tcp_flags, r.label)


def read_pcap(path) -> list[PacketRecord]:
    return normalize_timestamps(list(PcapReader(path)))


def read_pcap_counted(path) -> tuple[list[PacketRecord], int]:
    """Like read_pcap, also returning how many frames were skipped."""
    reader = PcapReader(path)
    records = list(reader)
    return normalize_timestamps(records), reader.skipped


# ---------------------------------------------------------------------------
# canonical CSV

CSV_COLUMNS = (
    "timestamp_us", "src_ip", "dst_ip", "src_port", "dst_port",
    "protocol", "frame_len", "payload_len", "tcp_flags", "label",
)
CSV_HEADER = ",".join(CSV_COLUMNS)


def _parse_row(row, has_label):
    ts, src, dst, sport, dport, proto, flen, plen, flags = row[:9]
    label_text = row[9] if has_label else ""
    rec = PacketRecord(
        timestamp_us=int(ts),
        src_ip=ip_to_int(src),
        dst_ip=ip_to_int(dst),
        src_port=int(sport),
        dst_port=int(dport),
        protocol=Protocol(proto),
        frame_len=int(flen),
        payload_len=int(plen),
        tcp_flags=int(flags),
        label=Label.parse(label_text) if label_text else None,
    )
    if rec.timestamp_us < 0 or rec.frame_len < 0:
        raise ValueError("negative timestamp or length")
    if not (0 <= rec.src_port <= 65535 and 0 <= rec.dst_port <= 65535):
        raise ValueError("port out of range")
    if not 0 <= rec.tcp_flags <= 0xFF:
        raise ValueError("tcp_flags is not an 8-bit mask")
    return rec


def read_packet_csv(path) -> list[PacketRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaMismatch(f"{path}: missing header row")
        header = [h.strip() for h in header]
        if tuple(header) == CSV_COLUMNS:
            has_label = True
        elif tuple(header) == CSV_COLUMNS[:-1]:
            has_label = False
        else:
            missing = [c for c in CSV_COLUMNS[:-1] if c not in header]
            detail = f"missing {missing}" if missing else f"got {header}"
            raise SchemaMismatch(f"{path}: header does not match {CSV_HEADER!r} ({detail})")
        width = len(header)
        records = []
        for i, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != width:
                raise UnparsableRow(i, f"expected {width} fields, got {len(row)}")
            try:
                records.append(_parse_row(row, has_label))
            except ValueError as exc:
                raise UnparsableRow(i, str(exc)) from None
    records.sort(key=lambda r: r.timestamp_us)
    return records


def write_packet_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow((
                r.timestamp_us, int_to_ip(r.src_ip), int_to_ip(r.dst_ip),
                r.src_port, r.dst_port, r.protocol.value, r.frame_len,
                r.payload_len, r.tcp_flags, "" if r.label is None else str(r.label),
            ))


def read_packets(path) -> tuple[list[PacketRecord], int]:
    """Dispatch on extension: ``.csv`` is the canonical CSV, anything else pcap."""
    if str(path).lower().endswith(".csv"):
        return read_packet_csv(path), 0
    return read_pcap_counted(path)


# ---------------------------------------------------------------------------
# writing pcap (fixtures, synthetic captures)

def build_ethernet_ipv4(rec: PacketRecord, src_mac=b"\x02" * 6, dst_mac=b"\x04" * 6) -> bytes:
    """Serialize a record as an Ethernet/IPv4 frame with a zero-filled payload.

    Header sizes are minimal (no IP or TCP options), so the frame is
    ``frame_len`` bytes only when the record is self-consistent with that.
    """
    proto_num = {Protocol.TCP: 6, Protocol.UDP: 17, Protocol.ICMP: 1}.get(rec.protocol, 253)
    if rec.protocol is Protocol.TCP:
        l4 = struct.pack("!HHIIBBHHH", rec.src_port, rec.dst_port, 0, 0, 5 << 4,
                         rec.tcp_flags, 65535, 0, 0)
    elif rec.protocol is Protocol.UDP:
        l4 = struct.pack("!HHHH", rec.src_port, rec.dst_port, 8 + rec.payload_len, 0)
    elif rec.protocol is Protocol.ICMP:
        l4 = struct.pack("!BBHI", 8, 0, 0, 0)
    else:
        l4 = b""
    body = l4 + bytes(rec.payload_len)
    ip = struct.pack("!BBHHHBBHII", 0x45, 0, 20 + len(body), 0, 0, 64, proto_num, 0,
                     rec.src_ip, rec.dst_ip)
    return dst_mac + src_mac + struct.pack("!H", _ETH_IPV4) + ip + body


def write_pcap(frames, path, byteorder="<", snaplen=65535):
    """Write ``(timestamp_us, frame_bytes)`` pairs as a classic pcap file."""
    with open(path, "wb") as fh:
        fh.write(struct.pack(byteorder + "IHHiIII", _MAGIC_US, 2, 4, 0, 0, snaplen,
                             LINKTYPE_ETHERNET))
        for ts, frame in frames:
            fh.write(struct.pack(byteorder + "IIII", ts // 1_000_000, ts % 1_000_000,
                                 len(frame), len(frame)))
            fh.write(frame)
