import math
import struct
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from inodevfs import layout
from inodevfs.blockdev import create_image, open_image
from inodevfs.errors import BadGeometry, CorruptImage
from inodevfs.layout import (AuthRecord, FileMapEntry, Inode, Superblock, compute_geometry,
                             deserialize_file_map, deserialize_inode_table, deserialize_superblock,
                             format_disk, load_structures, serialize_file_map, serialize_inode_table,
                             serialize_superblock, store_structures)


def fig2_oracle(block_size, disk_blocks, inodes):
    """Ceiling formulas over exact rationals with the serialized record sizes."""
    sb = math.ceil(Fraction(97 + inodes + disk_blocks, block_size))
    mp = math.ceil(Fraction(36 * inodes, block_size))
    ino = math.ceil(Fraction(inodes * 52, block_size))
    return dict(sb_blocks=sb, map_blocks=mp, inode_start=sb + mp, inode_blocks=ino,
                data_start=sb + mp + ino, available_blocks=disk_blocks - (sb + mp + ino))


def as_dict(g):
    return {k: getattr(g, k) for k in ("sb_blocks", "map_blocks", "inode_start", "inode_blocks",
                                       "data_start", "available_blocks")}


def test_default_geometry():
    g = compute_geometry(4096, 4096, 128)
    assert as_dict(g) == dict(sb_blocks=2, map_blocks=2, inode_start=4, inode_blocks=2,
                              data_start=6, available_blocks=4090)
    assert g.pointers_per_block == 1024


def test_tiny_geometry():
    g = compute_geometry(64, 1024, 8)
    assert as_dict(g) == dict(sb_blocks=18, map_blocks=5, inode_start=23, inode_blocks=7,
                              data_start=30, available_blocks=994)


def test_no_data_blocks_left():
    with pytest.raises(BadGeometry):
        compute_geometry(64, 30, 8)
    with pytest.raises(BadGeometry):
        compute_geometry(64, 64, 0)


@settings(max_examples=300)
@given(bs=st.integers(16, 2048).map(lambda k: 4 * k), n=st.integers(64, 20000), inodes=st.integers(1, 600))
def test_geometry_matches_rational_oracle(bs, n, inodes):
    expected = fig2_oracle(bs, n, inodes)
    if expected["available_blocks"] <= 0:
        with pytest.raises(BadGeometry):
            compute_geometry(bs, n, inodes)
    else:
        assert as_dict(compute_geometry(bs, n, inodes)) == expected


def test_superblock_golden_offsets():
    g = compute_geometry(4096, 4096, 128)
    sb = Superblock.fresh(g)
    sb.inode_freelist[3] = 1
    sb.datablock_freelist[100] = 1
    sb.auth = AuthRecord(True, "alice", 0x0102030405060708, 0xA1A2A3A4A5A6A7A8, 10000)
    raw = serialize_superblock(sb)
    assert len(raw) == 4321
    assert raw[0:4] == b"VFSD"
    ints = struct.unpack_from("<I9i", raw, 4)
    assert ints == (1, 4096, 4096, 128, 2, 2, 4, 2, 6, 4090)
    assert raw[44] == 1
    assert raw[45:77] == b"alice" + bytes(27)
    assert raw[77:85] == bytes([8, 7, 6, 5, 4, 3, 2, 1])
    assert raw[85:93] == bytes([0xA8, 0xA7, 0xA6, 0xA5, 0xA4, 0xA3, 0xA2, 0xA1])
    assert raw[93:97] == (10000).to_bytes(4, "little")
    assert raw[97:97 + 128] == bytes(3) + b"\1" + bytes(124)
    blocks = raw[97 + 128:]
    assert blocks[:6] == b"\1" * 6 and blocks[100] == 1 and sum(blocks) == 7


def test_superblock_bad_magic_and_version():
    raw = bytearray(serialize_superblock(Superblock.fresh(compute_geometry(64, 1024, 8))))
    bad = bytearray(raw)
    bad[:4] = b"XXXX"
    with pytest.raises(CorruptImage):
        deserialize_superblock(bad)
    bad = bytearray(raw)
    bad[4] = 2
    with pytest.raises(CorruptImage):
        deserialize_superblock(bad)
    bad = bytearray(raw)
    bad[36] += 1  # data_start no longer matches the formulas
    with pytest.raises(CorruptImage):
        deserialize_superblock(bad)


geometries = st.sampled_from([(64, 1024, 8), (64, 64, 1), (128, 500, 20), (4096, 4096, 128)])


@st.composite
def superblocks(draw):
    g = compute_geometry(*draw(geometries))
    sb = Superblock.fresh(g)
    sb.inode_freelist = bytearray(draw(st.lists(st.integers(0, 1), min_size=g.no_of_inodes,
                                                max_size=g.no_of_inodes)))
    tail = draw(st.binary(min_size=g.available_blocks, max_size=g.available_blocks))
    sb.datablock_freelist[g.data_start:] = bytes(b & 1 for b in tail)
    if draw(st.booleans()):
        sb.auth = AuthRecord(True, draw(st.from_regex(r"[a-z0-9]{1,30}", fullmatch=True)),
                             draw(st.integers(0, 2**64 - 1)), draw(st.integers(0, 2**64 - 1)), 10000)
    return sb


@settings(max_examples=50, deadline=None)
@given(superblocks())
def test_superblock_round_trip(sb):
    raw = serialize_superblock(sb)
    back = deserialize_superblock(raw)
    assert back == sb
    assert serialize_superblock(back) == raw


def test_fresh_inode_bytes():
    raw = serialize_inode_table([Inode()])
    assert len(raw) == 52
    assert raw == bytes(4) + b"\xff\xff\xff\xff" * 12


def test_inode_table_size():
    assert len(serialize_inode_table([Inode() for _ in range(128)])) == 6656


def test_free_map_slot_bytes():
    assert serialize_file_map([FileMapEntry()]) == bytes(32) + b"\xff" * 4
    assert serialize_file_map([FileMapEntry("main.cpp", 2)]) == b"main.cpp" + bytes(24) + b"\2\0\0\0"


pointers = st.integers(-1, 2**31 - 1)


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(0, 2**31 - 1), st.lists(pointers, min_size=12, max_size=12)),
                min_size=1, max_size=10))
def test_inode_table_round_trip(rows):
    table = [Inode(size, p[:10], p[10], p[11]) for size, p in rows]
    raw = serialize_inode_table(table)
    assert len(raw) == 52 * len(table)
    assert deserialize_inode_table(raw, len(table)) == table


@settings(max_examples=50)
@given(st.lists(st.tuples(st.from_regex(r"[A-Za-z0-9._-]{1,30}", fullmatch=True), st.integers(0, 1000)),
                max_size=10))
def test_file_map_round_trip(rows):
    entries = [FileMapEntry(n, i) for n, i in rows] + [FileMapEntry()]
    raw = serialize_file_map(entries)
    assert deserialize_file_map(raw, len(entries)) == entries


def test_table_length_mismatch():
    with pytest.raises(CorruptImage):
        deserialize_inode_table(bytes(51), 1)
    with pytest.raises(CorruptImage):
        deserialize_file_map(bytes(35), 1)


def test_format_tiny(tmp_path):
    g = compute_geometry(64, 1024, 8)
    path = tmp_path / "tiny"
    with create_image(path, 64, 1024) as dev:
        sb = format_disk(dev, g)
    image = path.read_bytes()
    assert image[:4] == b"VFSD"
    assert image[30 * 64:] == bytes((1024 - 30) * 64)
    assert sb.datablock_freelist.count(0) == g.available_blocks
    assert sum(sb.datablock_freelist) == g.data_start
    assert sum(sb.inode_freelist) == 0
    # file map region: every slot free
    map_region = image[18 * 64:18 * 64 + 8 * 36]
    assert map_region == (bytes(32) + b"\xff" * 4) * 8
    inode_region = image[23 * 64:23 * 64 + 8 * 52]
    assert inode_region == (bytes(4) + b"\xff" * 48) * 8


def test_load_after_format_and_fixed_point(tmp_path):
    path = tmp_path / "tiny"
    with create_image(path, 64, 1024) as dev:
        format_disk(dev, compute_geometry(64, 1024, 8))
    first = path.read_bytes()
    with open_image(path) as dev:
        sb, inodes, fmap = load_structures(dev)
        assert all(e.free for e in fmap)
        assert all(i == Inode() for i in inodes)
        store_structures(dev, sb, inodes, fmap)
    assert path.read_bytes() == first
    with open_image(path) as dev:
        assert load_structures(dev) == (sb, inodes, fmap)


def test_truncated_image_corrupt(tmp_path):
    path = tmp_path / "tiny"
    with create_image(path, 64, 1024) as dev:
        format_disk(dev, compute_geometry(64, 1024, 8))
    path.write_bytes(path.read_bytes()[:-64])
    with pytest.raises(CorruptImage):
        open_image(path)


def test_inconsistent_tables_corrupt(tmp_path):
    path = tmp_path / "tiny"
    g = compute_geometry(64, 1024, 8)
    with create_image(path, 64, 1024) as dev:
        sb = format_disk(dev, g)
        fmap = [FileMapEntry() for _ in range(8)]
        fmap[0] = FileMapEntry("ghost", 3)  # inode 3 is free
        store_structures(dev, sb, [Inode() for _ in range(8)], fmap)
    with open_image(path) as dev, pytest.raises(CorruptImage):
        load_structures(dev)


def test_record_sizes():
    assert layout.INODE_SIZE == 52
    assert layout.MAP_ENTRY_SIZE == 36
    assert layout.SUPERBLOCK_FIXED == 97
