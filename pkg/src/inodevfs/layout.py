"""Bit-exact on-disk format: superblock, file-to-inode map and inode table.

Image layout, in blocks::

    [0, sb_blocks)              superblock
    [sb_blocks, inode_start)    file-to-inode map, 36 bytes per entry
    [inode_start, data_start)   inode table, 52 bytes per inode
    [data_start, disk_blocks)   data and pointer blocks

Every integer is little-endian. Structures are zero-padded to a block
boundary.
"""

import os
import struct
from dataclasses import dataclass, field

from .blockdev import BlockDevice, check_geometry
from .errors import BadGeometry, CorruptImage, IoFailure, NotFound

MAGIC = b"VFSD"
VERSION = 1

NUM_DIRECT = 10
POINTER_SIZE = 4
NO_BLOCK = -1

INODE_SIZE = 52  # file_size + 10 direct + single + double, int32 each
MAP_ENTRY_SIZE = 36  # 32-byte name + int32 inode index
NAME_FIELD = 32
MAX_NAME_LEN = 30
AUTH_ITERATIONS = 10000

DEFAULT_BLOCK_SIZE = 4096
DEFAULT_DISK_BLOCKS = 4096
DEFAULT_INODES = 128

_HEADER = struct.Struct("<4sI9i")  # magic, version, 3 primary + 6 derived
_AUTH = struct.Struct("<B32sQQI")
SUPERBLOCK_FIXED = _HEADER.size + _AUTH.size  # 97
_INODE = struct.Struct("<13i")
_MAP_ENTRY = struct.Struct("<32si")

assert _INODE.size == INODE_SIZE and _MAP_ENTRY.size == MAP_ENTRY_SIZE and SUPERBLOCK_FIXED == 97


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def superblock_size(disk_blocks: int, no_of_inodes: int) -> int:
    return SUPERBLOCK_FIXED + no_of_inodes + disk_blocks


@dataclass(frozen=True)
class Geometry:
    block_size: int
    disk_blocks: int
    no_of_inodes: int
    sb_blocks: int
    map_blocks: int
    inode_start: int
    inode_blocks: int
    data_start: int
    available_blocks: int

    @property
    def pointers_per_block(self) -> int:
        return self.block_size // POINTER_SIZE

    @property
    def image_size(self) -> int:
        return self.block_size * self.disk_blocks


def compute_geometry(block_size: int = DEFAULT_BLOCK_SIZE, disk_blocks: int = DEFAULT_DISK_BLOCKS,
                     no_of_inodes: int = DEFAULT_INODES) -> Geometry:
    check_geometry(block_size, disk_blocks)
    if no_of_inodes < 1:
        raise BadGeometry(f"need at least one inode, got {no_of_inodes}")
    sb_blocks = _ceil_div(superblock_size(disk_blocks, no_of_inodes), block_size)
    map_blocks = _ceil_div(no_of_inodes * MAP_ENTRY_SIZE, block_size)
    inode_start = sb_blocks + map_blocks
    inode_blocks = _ceil_div(no_of_inodes * INODE_SIZE, block_size)
    data_start = sb_blocks + map_blocks + inode_blocks
    available = disk_blocks - data_start
    if available <= 0:
        raise BadGeometry(f"metadata occupies {data_start} of {disk_blocks} blocks; no data blocks remain")
    return Geometry(block_size, disk_blocks, no_of_inodes, sb_blocks, map_blocks,
                    inode_start, inode_blocks, data_start, available)


def _pack_name(name: str) -> bytes:
    raw = name.encode("utf-8")
    if len(raw) > MAX_NAME_LEN:
        raise ValueError(f"name {name!r} longer than {MAX_NAME_LEN} bytes")
    return raw.ljust(NAME_FIELD, b"\0")


def _unpack_name(raw: bytes) -> str:
    name = raw.rstrip(b"\0")
    if b"\0" in name or len(name) > MAX_NAME_LEN:
        raise CorruptImage(f"malformed name field {raw!r}")
    try:
        return name.decode("utf-8")
    except UnicodeDecodeError:
        raise CorruptImage(f"undecodable name field {raw!r}") from None


@dataclass
class AuthRecord:
    enabled: bool = False
    username: str = ""
    salt: int = 0
    password_hash: int = 0
    iterations: int = 0


@dataclass
class Superblock:
    geometry: Geometry
    inode_freelist: bytearray
    datablock_freelist: bytearray
    auth: AuthRecord = field(default_factory=AuthRecord)
    magic: bytes = MAGIC
    version: int = VERSION

    @classmethod
    def fresh(cls, geometry: Geometry) -> "Superblock":
        blocks = bytearray(geometry.disk_blocks)
        blocks[:geometry.data_start] = b"\1" * geometry.data_start
        return cls(geometry, bytearray(geometry.no_of_inodes), blocks)

    def free_data_blocks(self) -> int:
        return self.datablock_freelist.count(0)


@dataclass
class Inode:
    file_size: int = 0
    direct: list = field(default_factory=lambda: [NO_BLOCK] * NUM_DIRECT)
    single_indirect: int = NO_BLOCK
    double_indirect: int = NO_BLOCK

    def pointers(self) -> list:
        return [*self.direct, self.single_indirect, self.double_indirect]

    def reset(self) -> None:
        self.file_size = 0
        self.direct = [NO_BLOCK] * NUM_DIRECT
        self.single_indirect = NO_BLOCK
        self.double_indirect = NO_BLOCK


@dataclass
class FileMapEntry:
    name: str = ""
    inode_index: int = NO_BLOCK

    @property
    def free(self) -> bool:
        return self.inode_index == NO_BLOCK


# --- superblock -------------------------------------------------------------

def _check_superblock(sb: Superblock) -> None:
    g = sb.geometry
    if sb.magic != MAGIC:
        raise CorruptImage(f"bad magic {sb.magic!r}")
    if sb.version != VERSION:
        raise CorruptImage(f"unsupported version {sb.version}")
    try:
        expected = compute_geometry(g.block_size, g.disk_blocks, g.no_of_inodes)
    except BadGeometry as e:
        raise CorruptImage(f"invalid geometry: {e}") from None
    if expected != g:
        raise CorruptImage("stored derived geometry disagrees with recomputed values")
    if len(sb.inode_freelist) != g.no_of_inodes or len(sb.datablock_freelist) != g.disk_blocks:
        raise CorruptImage("freelist lengths disagree with geometry")
    if any(b > 1 for b in sb.inode_freelist) or any(b > 1 for b in sb.datablock_freelist):
        raise CorruptImage("freelist bytes must be 0 or 1")
    if sb.datablock_freelist[:g.data_start].count(1) != g.data_start:
        raise CorruptImage("metadata blocks not marked in use")
    a = sb.auth
    if a.enabled:
        if a.iterations != AUTH_ITERATIONS or not a.username:
            raise CorruptImage("malformed authentication record")
    elif a.username or a.password_hash or a.salt or a.iterations:
        raise CorruptImage("disabled authentication record is not blank")


def serialize_superblock(sb: Superblock) -> bytes:
    _check_superblock(sb)
    g = sb.geometry
    a = sb.auth
    head = _HEADER.pack(sb.magic, sb.version, g.block_size, g.disk_blocks, g.no_of_inodes,
                        g.sb_blocks, g.map_blocks, g.inode_start, g.inode_blocks,
                        g.data_start, g.available_blocks)
    auth = _AUTH.pack(int(a.enabled), _pack_name(a.username), a.salt, a.password_hash, a.iterations)
    return head + auth + bytes(sb.inode_freelist) + bytes(sb.datablock_freelist)


def deserialize_superblock(data) -> Superblock:
    data = bytes(data)
    if len(data) < SUPERBLOCK_FIXED:
        raise CorruptImage("superblock truncated")
    magic, version, *ints = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise CorruptImage(f"bad magic {magic!r}")
    if version != VERSION:
        raise CorruptImage(f"unsupported version {version}")
    g = Geometry(*ints)
    enabled, uname, salt, phash, iters = _AUTH.unpack_from(data, _HEADER.size)
    if enabled > 1:
        raise CorruptImage("auth flag must be 0 or 1")
    if g.no_of_inodes < 1 or g.disk_blocks < 1:
        raise CorruptImage("invalid geometry in superblock")
    end = SUPERBLOCK_FIXED + g.no_of_inodes + g.disk_blocks
    if len(data) < end:
        raise CorruptImage("superblock truncated")
    inodes = bytearray(data[SUPERBLOCK_FIXED:SUPERBLOCK_FIXED + g.no_of_inodes])
    blocks = bytearray(data[SUPERBLOCK_FIXED + g.no_of_inodes:end])
    auth = AuthRecord(bool(enabled), _unpack_name(uname), salt, phash, iters)
    sb = Superblock(g, inodes, blocks, auth, magic, version)
    _check_superblock(sb)
    return sb


# --- inode table and file map -----------------------------------------------

def serialize_inode(inode: Inode) -> bytes:
    return _INODE.pack(inode.file_size, *inode.pointers())


def deserialize_inode(data) -> Inode:
    size, *ptrs = _INODE.unpack(bytes(data))
    return Inode(size, ptrs[:NUM_DIRECT], ptrs[NUM_DIRECT], ptrs[NUM_DIRECT + 1])


def serialize_inode_table(inodes) -> bytes:
    return b"".join(serialize_inode(i) for i in inodes)


def deserialize_inode_table(data, no_of_inodes: int) -> list:
    if len(data) < no_of_inodes * INODE_SIZE:
        raise CorruptImage("inode table truncated")
    return [deserialize_inode(data[i * INODE_SIZE:(i + 1) * INODE_SIZE]) for i in range(no_of_inodes)]


def serialize_file_map(entries) -> bytes:
    return b"".join(_MAP_ENTRY.pack(_pack_name(e.name), e.inode_index) for e in entries)


def deserialize_file_map(data, no_of_inodes: int) -> list:
    if len(data) < no_of_inodes * MAP_ENTRY_SIZE:
        raise CorruptImage("file map truncated")
    out = []
    for i in range(no_of_inodes):
        raw, index = _MAP_ENTRY.unpack_from(data, i * MAP_ENTRY_SIZE)
        out.append(FileMapEntry(_unpack_name(raw), index))
    return out


def check_tables(sb: Superblock, inodes, file_map) -> None:
    """Cross-check the file map against the inode table and freelist."""
    g = sb.geometry
    if len(inodes) != g.no_of_inodes or len(file_map) != g.no_of_inodes:
        raise CorruptImage("table lengths disagree with geometry")
    names, used = set(), set()
    for e in file_map:
        if e.free:
            if e.name:
                raise CorruptImage("free map slot carries a name")
            continue
        if not 0 <= e.inode_index < g.no_of_inodes or not e.name:
            raise CorruptImage(f"bad map entry {e}")
        if e.name in names or e.inode_index in used:
            raise CorruptImage(f"duplicate map entry {e}")
        if not sb.inode_freelist[e.inode_index]:
            raise CorruptImage(f"map entry {e.name!r} points at free inode {e.inode_index}")
        names.add(e.name)
        used.add(e.inode_index)
    if len(used) != sum(sb.inode_freelist):
        raise CorruptImage("in-use inodes not all mapped")
    for i, inode in enumerate(inodes):
        for p in inode.pointers():
            if p != NO_BLOCK and not g.data_start <= p < g.disk_blocks:
                raise CorruptImage(f"inode {i} pointer {p} out of range")


# --- block-level I/O ----------------------------------------------------------

def _write_region(dev: BlockDevice, start: int, nblocks: int, data: bytes) -> None:
    bs = dev.block_size
    data = data.ljust(nblocks * bs, b"\0")
    for i in range(nblocks):
        dev.write_block(start + i, data[i * bs:(i + 1) * bs])


def _read_region(dev: BlockDevice, start: int, nblocks: int) -> bytes:
    return b"".join(dev.read_block(start + i) for i in range(nblocks))


def store_structures(dev: BlockDevice, sb: Superblock, inodes, file_map) -> None:
    g = sb.geometry
    _write_region(dev, 0, g.sb_blocks, serialize_superblock(sb))
    _write_region(dev, g.sb_blocks, g.map_blocks, serialize_file_map(file_map))
    _write_region(dev, g.inode_start, g.inode_blocks, serialize_inode_table(inodes))


def format_disk(dev: BlockDevice, geometry: Geometry) -> Superblock:
    """Write an empty filesystem: superblock, free file map, free inodes."""
    if (dev.block_size, dev.disk_blocks) != (geometry.block_size, geometry.disk_blocks):
        raise BadGeometry("device shape does not match geometry")
    sb = Superblock.fresh(geometry)
    n = geometry.no_of_inodes
    store_structures(dev, sb, [Inode() for _ in range(n)], [FileMapEntry() for _ in range(n)])
    dev.flush()
    return sb


def load_structures(dev: BlockDevice):
    """Read (superblock, inode table, file map) and revalidate them."""
    first = dev.read_block(0)
    sb_bytes = first
    try:
        sb_blocks = _HEADER.unpack_from(first, 0)[5]
    except struct.error:
        raise CorruptImage("superblock truncated") from None
    if sb_blocks > 1:
        if sb_blocks > dev.disk_blocks:
            raise CorruptImage("superblock larger than disk")
        sb_bytes += _read_region(dev, 1, sb_blocks - 1)
    sb = deserialize_superblock(sb_bytes)
    g = sb.geometry
    if (g.block_size, g.disk_blocks) != (dev.block_size, dev.disk_blocks):
        raise CorruptImage("superblock geometry disagrees with device")
    file_map = deserialize_file_map(_read_region(dev, g.sb_blocks, g.map_blocks), g.no_of_inodes)
    inodes = deserialize_inode_table(_read_region(dev, g.inode_start, g.inode_blocks), g.no_of_inodes)
    check_tables(sb, inodes, file_map)
    return sb, inodes, file_map


def read_header(path):
    """Return (block_size, disk_blocks) from an image, checking its length."""
    try:
        with open(path, "rb") as f:
            head = f.read(_HEADER.size)
            length = os.fstat(f.fileno()).st_size
    except FileNotFoundError:
        raise NotFound(f"disk {path} does not exist") from None
    except (OSError, ValueError) as e:
        raise IoFailure(str(e)) from e
    if len(head) < _HEADER.size:
        raise CorruptImage(f"{path} is too short to hold a superblock")
    magic, version, block_size, disk_blocks, *_ = _HEADER.unpack(head)
    if magic != MAGIC:
        raise CorruptImage(f"bad magic {magic!r}")
    if version != VERSION:
        raise CorruptImage(f"unsupported version {version}")
    try:
        check_geometry(block_size, disk_blocks)
    except BadGeometry as e:
        raise CorruptImage(str(e)) from None
    if length != block_size * disk_blocks:
        raise CorruptImage(f"image is {length} bytes, header promises {block_size * disk_blocks}")
    return block_size, disk_blocks
