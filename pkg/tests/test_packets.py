import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import crafted_pcap

from driftids.errors import (
    BadMagic, IngestError, SchemaMismatch, TruncatedPacket, UnparsableRow, UnsupportedLinkType,
)
from driftids.labels import BENIGN, MALICIOUS
from driftids.packets import (
    CSV_HEADER, PacketRecord, Protocol, build_ethernet_ipv4, ip_to_int, parse_ethernet,
    read_packet_csv, read_pcap, read_pcap_counted, write_packet_csv, write_pcap,
)


@pytest.fixture
def pcap_le(tmp_path):
    p = tmp_path / "three.pcap"
    p.write_bytes(crafted_pcap())
    return p


def test_crafted_pcap_two_records_one_skipped(pcap_le):
    records, skipped = read_pcap_counted(pcap_le)
    assert len(records) == 2
    assert skipped == 1
    a, b = records
    assert a.five_tuple == (ip_to_int("10.0.0.1"), ip_to_int("10.0.0.2"), 40000, 1883, "TCP")
    assert b.five_tuple == (ip_to_int("10.0.0.2"), ip_to_int("10.0.0.1"), 1883, 40000, "TCP")
    assert a.tcp_flags == 0x02 and b.tcp_flags == 0x18
    assert a.payload_len == 0 and b.payload_len == 5
    assert a.frame_len == 54 and b.frame_len == 59
    # normalized: first packet at t=0, second 1 s - 50 us later
    assert a.timestamp_us == 0
    assert b.timestamp_us == 1_000_000 - 50
    assert a.label is None


def test_crafted_pcap_matches_independent_decoder(pcap_le):
    dpkt = pytest.importorskip("dpkt")
    expected = []
    with open(pcap_le, "rb") as fh:
        for _, buf in dpkt.pcap.Reader(fh):
            eth = dpkt.ethernet.Ethernet(buf)
            if not isinstance(eth.data, dpkt.ip.IP):
                continue
            ip = eth.data
            expected.append((int.from_bytes(ip.src, "big"), int.from_bytes(ip.dst, "big"),
                             ip.data.sport, ip.data.dport, "TCP", len(ip.data.data)))
    got = [(*r.five_tuple, r.payload_len) for r in read_pcap(pcap_le)]
    assert got == expected


def test_byte_swapped_magic_parses_identically(tmp_path, pcap_le):
    be = tmp_path / "be.pcap"
    be.write_bytes(crafted_pcap(endian=">"))
    assert read_pcap(be) == read_pcap(pcap_le)


def test_empty_capture(tmp_path):
    p = tmp_path / "empty.pcap"
    p.write_bytes(crafted_pcap()[:24])
    assert read_pcap(p) == []


def test_bad_magic(tmp_path):
    p = tmp_path / "bad.pcap"
    p.write_bytes(struct.pack("<I", 0xDEADBEEF) + bytes(20))
    with pytest.raises(BadMagic):
        read_pcap(p)


def test_truncated_record(tmp_path):
    p = tmp_path / "trunc.pcap"
    p.write_bytes(crafted_pcap()[:-3])
    with pytest.raises(TruncatedPacket):
        read_pcap(p)


def test_unsupported_linktype(tmp_path):
    p = tmp_path / "raw.pcap"
    p.write_bytes(crafted_pcap(linktype=101))
    with pytest.raises(UnsupportedLinkType):
        read_pcap(p)


def test_writer_round_trips_through_reader(tmp_path):
    recs = [
        PacketRecord(0, ip_to_int("10.1.1.1"), ip_to_int("10.1.1.2"), 5000, 53, Protocol.UDP, 70, 28),
        PacketRecord(10, ip_to_int("10.1.1.2"), ip_to_int("10.1.1.1"), 0, 0, Protocol.ICMP, 98, 56),
        PacketRecord(25, ip_to_int("10.1.1.1"), ip_to_int("10.1.1.9"), 999, 80, Protocol.TCP, 60, 6,
                     tcp_flags=0x10),
    ]
    p = tmp_path / "w.pcap"
    write_pcap([(r.timestamp_us, build_ethernet_ipv4(r)) for r in recs], p)
    assert read_pcap(p) == recs


# -- CSV ---------------------------------------------------------------------

def _write(tmp_path, text):
    p = tmp_path / "pk.csv"
    p.write_text(text)
    return p


def test_csv_labels(tmp_path):
    p = _write(tmp_path, CSV_HEADER + "\n"
               "5,10.0.0.1,10.0.0.2,1,2,TCP,60,6,2,benign\n"
               "7,10.0.0.3,10.0.0.2,1,2,UDP,60,18,0,malicious\n")
    recs = read_packet_csv(p)
    assert [r.label for r in recs] == [BENIGN, MALICIOUS]


def test_csv_sorted_on_output(tmp_path):
    p = _write(tmp_path, CSV_HEADER + "\n"
               "9,10.0.0.1,10.0.0.2,1,2,TCP,60,6,2,\n"
               "3,10.0.0.1,10.0.0.2,1,2,TCP,60,6,2,\n")
    assert [r.timestamp_us for r in read_packet_csv(p)] == [3, 9]


def test_csv_label_column_optional(tmp_path):
    header = CSV_HEADER.rsplit(",", 1)[0]
    p = _write(tmp_path, header + "\n1,10.0.0.1,10.0.0.2,1,2,ICMP,60,0,0\n")
    (rec,) = read_packet_csv(p)
    assert rec.label is None and rec.protocol is Protocol.ICMP


def test_csv_missing_column(tmp_path):
    header = CSV_HEADER.replace("dst_port,", "")
    p = _write(tmp_path, header + "\n")
    with pytest.raises(SchemaMismatch, match="dst_port"):
        read_packet_csv(p)


@pytest.mark.parametrize("row", [
    "x,10.0.0.1,10.0.0.2,1,2,TCP,60,6,2,",
    "1,10.0.0.300,10.0.0.2,1,2,TCP,60,6,2,",
    "1,10.0.0.1,10.0.0.2,1,70000,TCP,60,6,2,",
    "1,10.0.0.1,10.0.0.2,1,2,SCTP,60,6,2,",
    "1,10.0.0.1,10.0.0.2,1,2,TCP,60,61,2,",
    "1,10.0.0.1,10.0.0.2,1,2,TCP,60,6,2,evil",
])
def test_csv_unparsable_row_reports_index(tmp_path, row):
    p = _write(tmp_path, CSV_HEADER + "\n1,10.0.0.1,10.0.0.2,1,2,TCP,60,6,2,\n" + row + "\n")
    with pytest.raises(UnparsableRow) as info:
        read_packet_csv(p)
    assert info.value.row_index == 2


ips = st.integers(0, 2**32 - 1)
ports = st.integers(0, 65535)


@st.composite
def packet_records(draw):
    frame = draw(st.integers(0, 9000))
    proto = draw(st.sampled_from(list(Protocol)))
    return PacketRecord(
        timestamp_us=draw(st.integers(0, 10**12)),
        src_ip=draw(ips), dst_ip=draw(ips), src_port=draw(ports), dst_port=draw(ports),
        protocol=proto, frame_len=frame, payload_len=draw(st.integers(0, frame)),
        tcp_flags=draw(st.integers(0, 255)) if proto is Protocol.TCP else 0,
        label=draw(st.sampled_from([None, BENIGN, MALICIOUS])),
    )


@settings(max_examples=60, deadline=None)
@given(st.lists(packet_records(), max_size=30))
def test_csv_round_trip(tmp_path_factory, records):
    records = sorted(records, key=lambda r: r.timestamp_us)
    p = tmp_path_factory.mktemp("rt") / "rt.csv"
    write_packet_csv(records, p)
    assert read_packet_csv(p) == records


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=120), st.integers(0, 200))
def test_parse_ethernet_never_overstates_payload(frame, extra):
    rec = parse_ethernet(frame, 0, len(frame) + extra)
    if rec is not None:
        assert 0 <= rec.payload_len <= rec.frame_len


@settings(max_examples=200, deadline=None)
@given(st.binary(max_size=400))
def test_read_pcap_fuzz(tmp_path_factory, body):
    p = tmp_path_factory.mktemp("fz") / "f.pcap"
    p.write_bytes(crafted_pcap()[:24] + body)
    try:
        records = read_pcap(p)
    except IngestError:
        return
    for r in records:
        assert r.payload_len <= r.frame_len
    ts = [r.timestamp_us for r in records]
    assert ts == sorted(ts)
