"""Four-phase concept-drift streams built from labeled sample pools."""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import InsufficientPool, InvalidDescriptor, InvalidSpec
from .features import N_FEATURES, FeatureVector
from .labels import BENIGN, MALICIOUS, Label
from .packets import ACK, PSH, SYN, PacketRecord, Protocol

N_PHASES = 4
FORWARD, BACKWARD = "forward", "backward"


@dataclass(frozen=True)
class PhaseSpec:
    pool_id: str
    attack_class: str = ""
    benign_count: int = 0
    malicious_count: int = 0

    def __post_init__(self):
        if self.benign_count < 0 or self.malicious_count < 0:
            raise InvalidSpec(f"phase {self.pool_id!r}: negative sample count")

    @property
    def size(self):
        return self.benign_count + self.malicious_count


@dataclass(frozen=True)
class StreamSpec:
    """Four phases listed in forward order.

    ``direction`` only decides the emission order, so the phases tuple of
    a backward spec is still the forward listing. Samples are drawn from
    the pools in forward order either way, which keeps each phase's
    content identical between the two directions.
    """

    phases: tuple
    direction: str = FORWARD
    shuffle_seed: Optional[int] = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))
        if len(self.phases) != N_PHASES:
            raise InvalidSpec(f"a stream needs exactly {N_PHASES} phases, got {len(self.phases)}")
        if self.direction not in (FORWARD, BACKWARD):
            raise InvalidSpec(f"direction must be {FORWARD!r} or {BACKWARD!r}")
        for p in self.phases:
            if p.size == 0:
                raise InvalidSpec(f"phase {p.pool_id!r} is empty")

    def ordered_phases(self):
        """Phases in emission order."""
        return self.phases if self.direction == FORWARD else self.phases[::-1]

    @property
    def length(self):
        return sum(p.size for p in self.phases)


def reverse_spec(spec: StreamSpec) -> StreamSpec:
    flipped = BACKWARD if spec.direction == FORWARD else FORWARD
    return replace(spec, direction=flipped)


@dataclass(frozen=True)
class DriftSchedule:
    boundaries: tuple
    length: int
    phase_names: tuple = ()

    def __post_init__(self):
        b = self.boundaries
        if any(x >= y for x, y in zip(b, b[1:])) or (b and (b[0] <= 0 or b[-1] >= self.length)):
            raise InvalidSpec(f"boundaries {b} are not strictly inside a stream of {self.length}")

    def phase_of(self, index: int) -> int:
        """0-based phase number of a sample index."""
        k = 0
        for b in self.boundaries:
            if index >= b:
                k += 1
        return k

    def phase_slices(self):
        edges = (0, *self.boundaries, self.length)
        return [slice(a, b) for a, b in zip(edges, edges[1:])]


def build_stream(spec: StreamSpec, pools: Mapping[str, Sequence[FeatureVector]]):
    """Draw, shuffle and concatenate the phases; returns ``(samples, schedule)``.

    Each phase takes the next unused benign and malicious samples of its
    pool, so a pool shared by two phases never repeats a sample.
    """
    by_class: dict[tuple, list] = {}
    cursor: dict[tuple, int] = {}
    drawn = {}
    for k, phase in enumerate(spec.phases):
        if phase.pool_id not in pools:
            raise InsufficientPool(phase.pool_id, "any", phase.size, 0)
        if (phase.pool_id, BENIGN) not in by_class:
            pool = pools[phase.pool_id]
            for lab in (BENIGN, MALICIOUS):
                by_class[(phase.pool_id, lab)] = [v for v in pool if v.label == lab]
                cursor[(phase.pool_id, lab)] = 0
        chosen = []
        for lab, need in ((BENIGN, phase.benign_count), (MALICIOUS, phase.malicious_count)):
            key = (phase.pool_id, lab)
            have = by_class[key]
            start = cursor[key]
            if start + need > len(have):
                raise InsufficientPool(phase.pool_id, str(Label(lab)), need, len(have) - start)
            chosen.extend(have[start:start + need])
            cursor[key] = start + need
        drawn[k] = chosen

    order = list(range(N_PHASES))
    if spec.direction == BACKWARD:
        order.reverse()
    rng = random.Random(spec.shuffle_seed) if spec.shuffle_seed is not None else random.SystemRandom()
    samples: list[FeatureVector] = []
    boundaries = []
    for k in order:
        phase_samples = list(drawn[k])
        rng.shuffle(phase_samples)
        if samples:
            boundaries.append(len(samples))
        samples.extend(phase_samples)
    names = tuple(spec.phases[k].pool_id for k in order)
    return samples, DriftSchedule(tuple(boundaries), len(samples), names)


# ---------------------------------------------------------------------------
# spec files

def dump_spec(spec: StreamSpec) -> str:
    lines = []
    if spec.name:
        lines.append(f"name = {spec.name}")
    lines.append(f"direction = {spec.direction}")
    if spec.shuffle_seed is not None:
        lines.append(f"shuffle_seed = {spec.shuffle_seed}")
    lines.append("# phase = pool_id | attack_class | benign_count | malicious_count")
    for p in spec.phases:
        lines.append(f"phase = {p.pool_id} | {p.attack_class} | {p.benign_count} | {p.malicious_count}")
    return "\n".join(lines) + "\n"


def parse_spec(text: str) -> StreamSpec:
    fields: dict = {"phases": []}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InvalidSpec(f"line {lineno}: expected key = value")
        key, value = key.strip(), value.strip()
        try:
            if key == "phase":
                parts = [p.strip() for p in value.split("|")]
                if len(parts) != 4:
                    raise InvalidSpec(f"line {lineno}: phase needs 4 '|'-separated fields")
                fields["phases"].append(PhaseSpec(parts[0], parts[1], int(parts[2]), int(parts[3])))
            elif key == "direction":
                fields["direction"] = value
            elif key == "shuffle_seed":
                fields["shuffle_seed"] = int(value) if value else None
            elif key == "name":
                fields["name"] = value
            else:
                raise InvalidSpec(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            raise InvalidSpec(f"line {lineno}: {exc}") from None
    return StreamSpec(**fields)


def load_spec(path) -> StreamSpec:
    with open(path) as fh:
        return parse_spec(fh.read())


def write_boundaries(schedule: DriftSchedule, path):
    with open(path, "w") as fh:
        fh.write("boundaries: " + ",".join(str(b) for b in schedule.boundaries) + "\n")


def read_boundaries(path) -> tuple:
    with open(path) as fh:
        text = fh.read().strip()
    key, _, value = text.partition(":")
    if key.strip() != "boundaries":
        raise InvalidSpec(f"{path}: not a boundary file")
    return tuple(int(v) for v in value.split(",") if v.strip())


# ---------------------------------------------------------------------------
# synthetic pools

@dataclass(frozen=True)
class ClassDist:
    """Independent per-feature distribution: Gaussian (loc, scale) or uniform [loc, loc+scale]."""

    loc: np.ndarray
    scale: np.ndarray
    kind: str = "gaussian"

    def __post_init__(self):
        loc = np.broadcast_to(np.asarray(self.loc, dtype=np.float64), (N_FEATURES,)).copy()
        scale = np.broadcast_to(np.asarray(self.scale, dtype=np.float64), (N_FEATURES,)).copy()
        object.__setattr__(self, "loc", loc)
        object.__setattr__(self, "scale", scale)
        if self.kind not in ("gaussian", "uniform"):
            raise InvalidDescriptor(f"unknown distribution kind {self.kind!r}")
        if not (np.all(np.isfinite(loc)) and np.all(np.isfinite(scale)) and np.all(scale >= 0)):
            raise InvalidDescriptor("distribution parameters must be finite, scale >= 0")

    def sample(self, rng, n):
        if self.kind == "gaussian":
            return rng.normal(self.loc, self.scale, size=(n, N_FEATURES))
        return self.loc + self.scale * rng.random((n, N_FEATURES))


@dataclass(frozen=True)
class PhaseDescriptor:
    pool_id: str
    benign: ClassDist
    malicious: ClassDist
    attack_class: str = ""
    bytes_per_window: tuple = (1200.0, 1200.0)


def gen_synthetic_pool(descriptors: Sequence[PhaseDescriptor], counts: Mapping[str, tuple],
                       seed: int) -> dict[str, list[FeatureVector]]:
    """Sample a labeled pool per descriptor; ``counts[pool_id] = (n_benign, n_malicious)``.

    Pools list benign samples first, then malicious. ``byte_count`` is
    drawn from a Poisson around the descriptor's per-class mean.
    """
    pools = {}
    window = 0
    for i, d in enumerate(descriptors):
        if not isinstance(d, PhaseDescriptor):
            raise InvalidDescriptor(f"descriptor {i} is not a PhaseDescriptor")
        nb, nm = counts.get(d.pool_id, (0, 0))
        if nb < 0 or nm < 0:
            raise InvalidDescriptor(f"{d.pool_id}: negative count")
        rng = np.random.default_rng([seed, i])
        out = []
        for lab, dist, n, mean_bytes in ((BENIGN, d.benign, nb, d.bytes_per_window[0]),
                                         (MALICIOUS, d.malicious, nm, d.bytes_per_window[1])):
            X = dist.sample(rng, n)
            sizes = rng.poisson(mean_bytes, size=n)
            for row, b in zip(X, sizes):
                out.append(FeatureVector(window, row, lab, int(b)))
                window += 1
        pools[d.pool_id] = out
    return pools


def drift_family(n_phases=N_PHASES, spread=0.05, shift=0.6, shared_concept=False,
                 conflicting_benign=True, bytes_per_window=(1200.0, 1200.0)):
    """Descriptors for a desk-scale drift stream in the unit cube.

    Phase ``k`` (0-based) has its own signature feature ``k``: malicious
    traffic moves that feature up by ``shift``, so malicious concepts of
    different phases occupy disjoint regions. With ``conflicting_benign``
    the benign traffic of phase ``k`` sits where phase ``k-1``'s attack
    did on that earlier signature feature, which is what makes frozen or
    slow-forgetting models fail after each boundary. ``shared_concept``
    instead gives every phase the concept of phase 0.
    """
    base = 0.2
    out = []
    for k in range(n_phases):
        sig = 0 if shared_concept else k
        benign = np.full(N_FEATURES, 0.5)
        benign[:n_phases] = base
        if conflicting_benign and not shared_concept and k > 0:
            benign[k - 1] = base + shift
        malicious = benign.copy()
        malicious[sig] = base + shift
        out.append(PhaseDescriptor(
            pool_id=f"P{k + 1}",
            benign=ClassDist(benign, spread),
            malicious=ClassDist(malicious, spread),
            attack_class=f"attack-{k + 1}",
            bytes_per_window=bytes_per_window,
        ))
    return out


def mixed_dataset1_spec(direction=FORWARD, shuffle_seed=None) -> StreamSpec:
    """Phase sizes of the Edge + MQTT mixed dataset: E1, M1, E2, M2."""
    return StreamSpec(
        phases=(
            PhaseSpec("E1", "Malware", 2369, 3072),
            PhaseSpec("M1", "DoS", 2637, 2610),
            PhaseSpec("E2", "DoS", 2263, 2021),
            PhaseSpec("M2", "Malware", 2639, 2011),
        ),
        direction=direction,
        shuffle_seed=shuffle_seed,
        name="mixed-1",
    )


def simulation_specs(shuffle_seed=None) -> dict[int, StreamSpec]:
    """The six four-phase simulations (three mixed datasets, both directions)."""
    d1 = mixed_dataset1_spec(shuffle_seed=shuffle_seed)
    d2 = StreamSpec((
        PhaseSpec("M1", "Malware", 2639, 2011),
        PhaseSpec("I1", "Info Gather", 1198, 654),
        PhaseSpec("M2", "DoS", 2637, 2610),
        PhaseSpec("I2", "Malware", 1021, 346),
    ), shuffle_seed=shuffle_seed, name="mixed-2")
    d3 = StreamSpec((
        PhaseSpec("E1", "Malware", 2369, 3072),
        PhaseSpec("I1", "Info Gather", 1198, 654),
        PhaseSpec("E2", "DoS", 2263, 2021),
        PhaseSpec("I2", "Malware", 1021, 346),
    ), shuffle_seed=shuffle_seed, name="mixed-3")
    return {1: d1, 2: reverse_spec(d1), 3: d2, 4: reverse_spec(d2), 5: d3, 6: reverse_spec(d3)}


def synthetic_pools_for(spec: StreamSpec, seed: int, family_kwargs=None):
    """Synthetic pools sized exactly for ``spec``, one drift-family phase per pool id."""
    ids = []
    for p in spec.phases:
        if p.pool_id not in ids:
            ids.append(p.pool_id)
    family = drift_family(n_phases=max(len(ids), N_PHASES), **(family_kwargs or {}))
    descriptors = [replace(d, pool_id=pid) for d, pid in zip(family, ids)]
    need: dict[str, list] = {pid: [0, 0] for pid in ids}
    for p in spec.phases:
        need[p.pool_id][0] += p.benign_count
        need[p.pool_id][1] += p.malicious_count
    return gen_synthetic_pool(descriptors, {k: tuple(v) for k, v in need.items()}, seed)


def drift_stream(samples_per_phase=2000, seed=0, shuffle_seed=None, direction=FORWARD,
                 **family_kwargs):
    """Balanced four-phase synthetic stream; returns ``(samples, schedule)``."""
    half = samples_per_phase // 2
    family = drift_family(**family_kwargs)
    pools = gen_synthetic_pool(family, {d.pool_id: (half, samples_per_phase - half) for d in family},
                               seed)
    spec = StreamSpec(
        tuple(PhaseSpec(d.pool_id, d.attack_class, half, samples_per_phase - half) for d in family),
        direction=direction,
        shuffle_seed=seed if shuffle_seed is None else shuffle_seed,
        name="synthetic-drift",
    )
    return build_stream(spec, pools)


def gen_packet_trace(n_packets=20000, seed=0, malicious_fraction=0.3, mean_gap_us=150):
    """Labeled MQTT-like packet trace: benign publishes plus a SYN-flood style attack.

    Used for end-to-end throughput fixtures; benign clients talk TCP to
    port 1883 with mid-sized frames, attackers send small SYNs to many ports.
    """
    rng = np.random.default_rng(seed)
    broker = 0x0A000001
    ts = 0
    out = []
    for _ in range(n_packets):
        ts += int(rng.exponential(mean_gap_us))
        if rng.random() < malicious_fraction:
            frame = int(rng.integers(54, 80))
            out.append(PacketRecord(
                ts, 0xC0A80000 + int(rng.integers(1, 20)), broker, int(rng.integers(1024, 65535)),
                int(rng.integers(1, 2000)), Protocol.TCP, frame, 0, SYN, MALICIOUS))
        else:
            frame = int(rng.integers(120, 1400))
            client = 0x0A000100 + int(rng.integers(1, 40))
            up = rng.random() < 0.5
            src, dst = (client, broker) if up else (broker, client)
            sport, dport = (40000 + (client & 0xFF), 1883) if up else (1883, 40000 + (client & 0xFF))
            out.append(PacketRecord(ts, src, dst, sport, dport, Protocol.TCP, frame, frame - 54,
                                    PSH | ACK, BENIGN))
    return out
