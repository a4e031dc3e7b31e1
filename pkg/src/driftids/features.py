"""1 ms windowed feature extraction, online min-max scaling and the feature CSV."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, replace
from typing import Iterable, Iterator

import numpy as np

from .errors import EmptyWindow, SchemaMismatch, UnparsableRow
from .labels import BENIGN, MALICIOUS, Label
from .packets import ACK, FIN, PSH, RST, SYN, URG, PacketRecord, Protocol

WINDOW_US = 1000
HOST_SET_CAP = 65536

FEATURE_NAMES = (
    # packet / window
    "packet_count", "mean_frame_len", "std_frame_len", "min_frame_len", "max_frame_len",
    "mean_payload_len", "tcp_fraction", "udp_fraction", "icmp_fraction",
    # tcp flags
    "syn_count", "ack_count", "fin_count", "rst_count", "psh_count", "urg_count",
    # dominant flow
    "flow_packet_count", "flow_byte_count", "flow_mean_inter_arrival_us",
    "flow_std_inter_arrival_us", "flow_duration_us", "flow_direction_ratio",
    # dominant source host
    "host_distinct_dst_ports", "host_packets_per_sec", "host_distinct_dst_ips",
    "host_bytes_per_sec",
)
N_FEATURES = len(FEATURE_NAMES)
assert N_FEATURES == 25

_FLAG_BITS = (SYN, ACK, FIN, RST, PSH, URG)


@dataclass(eq=False, slots=True)
class FeatureVector:
    window_id: int
    features: np.ndarray
    label: Label
    byte_count: int = 0

    def same_as(self, other) -> bool:
        return (
            self.window_id == other.window_id
            and self.label == other.label
            and self.byte_count == other.byte_count
            and np.array_equal(self.features, other.features)
        )


def window_assign(timestamp_us: int) -> int:
    if timestamp_us < 0:
        raise ValueError("timestamp_us must be non-negative")
    return timestamp_us // WINDOW_US


# ---------------------------------------------------------------------------
# running state

class _Flow:
    __slots__ = ("initiator", "packets", "bytes", "first_ts", "last_ts",
                 "ia_n", "ia_mean", "ia_m2", "forward")

    def __init__(self, initiator, ts):
        self.initiator = initiator
        self.packets = 0
        self.bytes = 0
        self.first_ts = ts
        self.last_ts = ts
        self.ia_n = 0
        self.ia_mean = 0.0
        self.ia_m2 = 0.0
        self.forward = 0

    def add(self, pkt: PacketRecord):
        if self.packets:
            gap = pkt.timestamp_us - self.last_ts
            self.ia_n += 1
            d = gap - self.ia_mean
            self.ia_mean += d / self.ia_n
            self.ia_m2 += d * (gap - self.ia_mean)
        self.packets += 1
        self.bytes += pkt.frame_len
        self.last_ts = pkt.timestamp_us
        if (pkt.src_ip, pkt.src_port) == self.initiator:
            self.forward += 1

    @property
    def ia_std(self):
        return math.sqrt(max(self.ia_m2, 0.0) / self.ia_n) if self.ia_n else 0.0


def flow_key(pkt: PacketRecord):
    """Direction-independent key: (protocol, lower endpoint, higher endpoint)."""
    a = (pkt.src_ip, pkt.src_port)
    b = (pkt.dst_ip, pkt.dst_port)
    lo, hi = (a, b) if a <= b else (b, a)
    return (lo[0], hi[0], lo[1], hi[1], pkt.protocol.value)


class FlowState:
    """Per-flow running statistics, keyed by the bidirectional 5-tuple."""

    def __init__(self):
        self.flows: dict[tuple, _Flow] = {}

    def update(self, pkt: PacketRecord) -> tuple:
        key = flow_key(pkt)
        flow = self.flows.get(key)
        if flow is None:
            flow = self.flows[key] = _Flow((pkt.src_ip, pkt.src_port), pkt.timestamp_us)
        flow.add(pkt)
        return key

    def __len__(self):
        return len(self.flows)


class _Host:
    __slots__ = ("packets", "bytes", "first_ts", "last_ts", "dst_ports", "dst_ips")

    def __init__(self, ts):
        self.packets = 0
        self.bytes = 0
        self.first_ts = ts
        self.last_ts = ts
        self.dst_ports: set[int] = set()
        self.dst_ips: set[int] = set()


class HostState:
    """Per-source-host counters; distinct sets stop growing at ``cap``."""

    def __init__(self, cap: int = HOST_SET_CAP):
        self.cap = cap
        self.hosts: dict[int, _Host] = {}

    def update(self, pkt: PacketRecord) -> int:
        host = self.hosts.get(pkt.src_ip)
        if host is None:
            host = self.hosts[pkt.src_ip] = _Host(pkt.timestamp_us)
        host.packets += 1
        host.bytes += pkt.frame_len
        host.last_ts = pkt.timestamp_us
        if len(host.dst_ports) < self.cap:
            host.dst_ports.add(pkt.dst_port)
        if len(host.dst_ips) < self.cap:
            host.dst_ips.add(pkt.dst_ip)
        return pkt.src_ip

    def __len__(self):
        return len(self.hosts)


# ---------------------------------------------------------------------------
# extraction

def window_label(packets: Iterable[PacketRecord]) -> Label:
    """Majority label; ties and label-free windows follow the rules below.

    Equal benign/malicious counts give malicious. A window whose packets
    carry no label at all is benign.
    """
    votes = Counter(p.label for p in packets if p.label is not None)
    return MALICIOUS if votes[MALICIOUS] >= votes[BENIGN] and votes[MALICIOUS] else BENIGN


def _dominant(counts: dict):
    # most packets, ties broken by the smallest key
    return min(counts, key=lambda k: (-counts[k], k))


def extract(window_packets, flow_state: FlowState, host_state: HostState) -> FeatureVector:
    packets = list(window_packets)
    if not packets:
        raise EmptyWindow("no packets in window")
    wid = window_assign(packets[0].timestamp_us)
    if any(window_assign(p.timestamp_us) != wid for p in packets):
        raise ValueError("packets span more than one window")

    n = len(packets)
    frames = np.fromiter((p.frame_len for p in packets), dtype=np.float64, count=n)
    payload_mean = sum(p.payload_len for p in packets) / n
    proto = Counter(p.protocol for p in packets)
    flag_counts = [0] * len(_FLAG_BITS)
    for p in packets:
        if p.tcp_flags:
            for i, bit in enumerate(_FLAG_BITS):
                if p.tcp_flags & bit:
                    flag_counts[i] += 1

    flow_hits: dict[tuple, int] = {}
    host_hits: dict[int, int] = {}
    for p in packets:
        fk = flow_state.update(p)
        flow_hits[fk] = flow_hits.get(fk, 0) + 1
        hk = host_state.update(p)
        host_hits[hk] = host_hits.get(hk, 0) + 1

    flow = flow_state.flows[_dominant(flow_hits)]
    host = host_state.hosts[_dominant(host_hits)]
    host_span_s = max(host.last_ts - host.first_ts, WINDOW_US) / 1e6

    values = [
        n, frames.mean(), frames.std(), frames.min(), frames.max(), payload_mean,
        proto[Protocol.TCP] / n, proto[Protocol.UDP] / n, proto[Protocol.ICMP] / n,
        *flag_counts,
        flow.packets, flow.bytes, flow.ia_mean, flow.ia_std,
        flow.last_ts - flow.first_ts, flow.forward / flow.packets,
        len(host.dst_ports), host.packets / host_span_s, len(host.dst_ips),
        host.bytes / host_span_s,
    ]
    return FeatureVector(
        window_id=wid,
        features=np.asarray(values, dtype=np.float64),
        label=window_label(packets),
        byte_count=int(frames.sum()),
    )


def extract_stream(packets: Iterable[PacketRecord], flow_state=None, host_state=None
                   ) -> Iterator[FeatureVector]:
    """Group a time-ordered packet stream into windows and extract each one."""
    flow_state = FlowState() if flow_state is None else flow_state
    host_state = HostState() if host_state is None else host_state
    batch: list[PacketRecord] = []
    current = None
    last_ts = -1
    for p in packets:
        if p.timestamp_us < last_ts:
            raise ValueError("packet stream is not time-ordered")
        last_ts = p.timestamp_us
        wid = p.timestamp_us // WINDOW_US
        if wid != current and batch:
            yield extract(batch, flow_state, host_state)
            batch = []
        current = wid
        batch.append(p)
    if batch:
        yield extract(batch, flow_state, host_state)


# ---------------------------------------------------------------------------
# scaling

class OnlineMinMaxScaler:
    """Running min-max scaling that only ever sees the past.

    ``transform`` maps with statistics from earlier samples; ``update``
    then folds the current sample in. A feature with no range yet (first
    sample, or constant so far) maps to 0.5. Values beyond the seen range
    are clipped into [0, 1].
    """

    def __init__(self, n_features: int = N_FEATURES):
        self.n_features = n_features
        self.n_seen = 0
        self.lo = np.full(n_features, np.inf)
        self.hi = np.full(n_features, -np.inf)

    def transform(self, x: np.ndarray) -> np.ndarray:
        if self.n_seen == 0:
            return np.full(self.n_features, 0.5)
        span = self.hi - self.lo
        out = np.full(self.n_features, 0.5)
        ok = span > 0
        # a subnormal span can overflow the ratio; the clip maps inf back to 1
        with np.errstate(over="ignore"):
            out[ok] = np.clip((x[ok] - self.lo[ok]) / span[ok], 0.0, 1.0)
        return out

    def update(self, x: np.ndarray):
        np.minimum(self.lo, x, out=self.lo)
        np.maximum(self.hi, x, out=self.hi)
        self.n_seen += 1

    def transform_update(self, x: np.ndarray) -> np.ndarray:
        out = self.transform(x)
        self.update(x)
        return out


def scale_update_apply(vector: FeatureVector, scaler: OnlineMinMaxScaler) -> FeatureVector:
    return replace(vector, features=scaler.transform_update(vector.features))


# ---------------------------------------------------------------------------
# feature CSV

FEATURE_CSV_COLUMNS = ("window_id", *(f"f{i}" for i in range(1, N_FEATURES + 1)),
                       "label", "byte_count")


def write_feature_csv(vectors: Iterable[FeatureVector], path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FEATURE_CSV_COLUMNS)
        for v in vectors:
            w.writerow((v.window_id, *(repr(float(f)) for f in v.features),
                        str(Label(v.label)), v.byte_count))


def read_feature_csv(path) -> list[FeatureVector]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != FEATURE_CSV_COLUMNS:
            raise SchemaMismatch(f"{path}: not a feature CSV")
        for i, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(FEATURE_CSV_COLUMNS):
                raise UnparsableRow(i, f"expected {len(FEATURE_CSV_COLUMNS)} fields")
            try:
                feats = np.array([float(v) for v in row[1:1 + N_FEATURES]])
                if not np.all(np.isfinite(feats)):
                    raise ValueError("non-finite feature")
                out.append(FeatureVector(int(row[0]), feats, Label.parse(row[-2]), int(row[-1])))
            except ValueError as exc:
                raise UnparsableRow(i, str(exc)) from None
    return out
