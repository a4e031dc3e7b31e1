import struct

import numpy as np
import pytest

from driftids.features import N_FEATURES


def threshold_stream(n, seed, flip_at=None, n_features=N_FEATURES, feature=0, cut=0.5):
    """Uniform features; label is ``x[feature] >= cut``, inverted from ``flip_at`` on."""
    rng = np.random.default_rng(seed)
    X = rng.random((n, n_features))
    y = (X[:, feature] >= cut).astype(int)
    if flip_at is not None:
        y[flip_at:] = 1 - y[flip_at:]
    return X, y


def prequential_accuracy(model, X, y):
    hits = []
    for x, t in zip(X, y):
        hits.append(int(model.predict(x)[0]) == t)
        model.learn(x, int(t))
    return np.asarray(hits)


# acceptance outcomes, echoed once at the end of the session
ACCEPTANCE = {}


def record_criterion(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])


@pytest.fixture
def separable():
    return threshold_stream(5000, seed=11)


# Hand-assembled frames; nothing below uses the package's own writers.
MAC_A = bytes.fromhex("020000000001")
MAC_B = bytes.fromhex("020000000002")


def _ipv4_tcp(src, dst, sport, dport, flags, payload=b""):
    tcp = struct.pack("!HHIIBBHHH", sport, dport, 1000, 0, 5 << 4, flags, 8192, 0, 0)
    total = 20 + len(tcp) + len(payload)
    ip = struct.pack("!BBHHHBBH4s4s", 0x45, 0, total, 1, 0, 64, 6, 0,
                     bytes(map(int, src.split("."))), bytes(map(int, dst.split("."))))
    return MAC_B + MAC_A + b"\x08\x00" + ip + tcp + payload


def _arp():
    body = struct.pack("!HHBBH6s4s6s4s", 1, 0x0800, 6, 4, 1, MAC_A, bytes([10, 0, 0, 1]),
                       b"\x00" * 6, bytes([10, 0, 0, 2]))
    return b"\xff" * 6 + MAC_A + b"\x08\x06" + body


def crafted_pcap(endian="<", magic=0xA1B2C3D4, linktype=1):
    frames = [
        (1_700_000_000, 100, _ipv4_tcp("10.0.0.1", "10.0.0.2", 40000, 1883, 0x02)),
        (1_700_000_000, 900, _arp()),
        (1_700_000_001, 50, _ipv4_tcp("10.0.0.2", "10.0.0.1", 1883, 40000, 0x18, b"hello")),
    ]
    out = struct.pack(endian + "IHHiIII", magic, 2, 4, 0, 0, 65535, linktype)
    for sec, usec, frame in frames:
        out += struct.pack(endian + "IIII", sec, usec, len(frame), len(frame)) + frame
    return out
