"""The mounted filesystem: file map, inode table, fd table and file operations.

Metadata (superblock, file map, inode table) is held in memory while
mounted and written back on unmount; data and pointer blocks go straight to
the device. Every operation validates fully before mutating anything, so a
failed call leaves both memory and image untouched.
"""

import enum
import os
from dataclasses import dataclass

from . import inode as inodes_mod
from .blockdev import BlockDevice, open_image
from .errors import (AlreadyOpen, AuthFailed, AuthRequired, BadFd, DiskFull, DuplicateName,
                     FdTableFull, FileOpen, InvalidMode, MapFull, NoFreeInode,
                     NotFound, VFSError, WrongMode)
from .layout import (DEFAULT_BLOCK_SIZE, DEFAULT_DISK_BLOCKS, DEFAULT_INODES, FileMapEntry,
                     compute_geometry, format_disk, load_structures, store_structures)
from .security import Credentials, check_credentials, validate_filename

MAX_OPEN_FILES = 32

MSG_MOUNTED = "Disk is mounted!!!"
MSG_UNMOUNTED = "Disk is unmounted!!!"
MSG_CREATED = "File Successfully Created :)"
MSG_DELETED = "File Successfully Deleted :)"
MSG_CLOSED = "File closed successfully."
MSG_WRITTEN = "File Written Successfully."
MSG_APPENDED = "File Appended Successfully."
LIST_HEADER = "List of All files"
OPEN_LIST_HEADER = "List of opened files"


def msg_opened(name: str, fd: int) -> str:
    return f"File {name} opened with file descriptor : {fd}"


def msg_bytes_written(n: int) -> str:
    return f"{n} bytes written."


def list_line(name: str, inode_index: int) -> str:
    return f"{name} with inode : {inode_index}"


def open_list_line(fd: int, name: str, mode: "Mode") -> str:
    return f"{name} with file descriptor : {fd} in {mode.value} mode"


class Mode(enum.Enum):
    READ = "read"
    WRITE = "write"
    APPEND = "append"

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            raise InvalidMode(f"unknown mode {value!r}") from None


@dataclass(frozen=True)
class OpenFile:
    fd: int
    inode_index: int
    name: str
    mode: Mode


def create_disk(path, block_size: int = DEFAULT_BLOCK_SIZE, disk_blocks: int = DEFAULT_DISK_BLOCKS,
                no_of_inodes: int = DEFAULT_INODES) -> None:
    """Create and format a new image; refuses to overwrite an existing file."""
    geometry = compute_geometry(block_size, disk_blocks, no_of_inodes)
    dev = BlockDevice.create(path, block_size, disk_blocks)
    try:
        format_disk(dev, geometry)
    except BaseException:
        dev.close()
        os.unlink(path)
        raise
    dev.close()


def mount(path, credentials: Credentials = None) -> "Mount":
    dev = open_image(path)
    try:
        sb, inode_table, file_map = load_structures(dev)
        if sb.auth.enabled:
            if credentials is None:
                raise AuthRequired("this disk requires a username and password")
            if not check_credentials(sb.auth, credentials):
                raise AuthFailed("wrong username or password")
    except BaseException:
        dev.close()
        raise
    return Mount(dev, sb, inode_table, file_map)


class Mount:
    def __init__(self, device: BlockDevice, superblock, inodes, file_map):
        self.device = device
        self.superblock = superblock
        self.inodes = inodes
        self.file_map = file_map
        self.fd_table = {}

    @property
    def geometry(self):
        return self.superblock.geometry

    @property
    def mounted(self) -> bool:
        return self.device is not None

    def _live(self) -> None:
        if self.device is None:
            raise VFSError("disk is not mounted")

    def _lookup(self, name: str) -> FileMapEntry:
        for entry in self.file_map:
            if not entry.free and entry.name == name:
                return entry
        raise NotFound(f"no file named {name!r}")

    def _fd_for_inode(self, inode_index: int):
        for of in self.fd_table.values():
            if of.inode_index == inode_index:
                return of
        return None

    def check_fd(self, fd: int, mode: Mode) -> OpenFile:
        """The open file behind ``fd``, provided it was opened with ``mode``."""
        self._live()
        return self._open(fd, mode)

    def _open(self, fd: int, mode: Mode) -> OpenFile:
        of = self.fd_table.get(fd) if isinstance(fd, int) else None
        if of is None:
            raise BadFd(f"file descriptor {fd} is not open")
        if of.mode is not mode:
            raise WrongMode(f"file descriptor {fd} is open for {of.mode.value}, not {mode.value}")
        return of

    # -- file lifecycle --------------------------------------------------------

    def create_file(self, name: str) -> int:
        """Bind ``name`` to the lowest free inode, which gets one data block."""
        self._live()
        validate_filename(name)
        if any(not e.free and e.name == name for e in self.file_map):
            raise DuplicateName(f"file {name!r} already exists")
        sb = self.superblock
        index = sb.inode_freelist.find(0)
        if index < 0:
            raise NoFreeInode("all inodes are in use")
        slot = next((e for e in self.file_map if e.free), None)
        if slot is None:
            raise MapFull("file map is full")
        if sb.free_data_blocks() < 1:
            raise DiskFull("no free data block")
        inodes_mod.allocate_lowest(sb.inode_freelist)
        node = self.inodes[index]
        node.reset()
        block = inodes_mod.resolve_block(self.device, self.geometry, node, 0, True, sb.datablock_freelist)
        self.device.write_block(block, bytes(self.geometry.block_size))
        slot.name, slot.inode_index = name, index
        return index

    def delete_file(self, name: str) -> None:
        self._live()
        entry = self._lookup(name)
        if self._fd_for_inode(entry.inode_index) is not None:
            raise FileOpen(f"file {name!r} is open; close it first")
        sb = self.superblock
        inodes_mod.free_chain(self.device, self.geometry, self.inodes[entry.inode_index],
                              sb.datablock_freelist)
        sb.inode_freelist[entry.inode_index] = 0
        entry.name, entry.inode_index = "", -1

    def open_file(self, name: str, mode) -> int:
        self._live()
        mode = Mode.parse(mode)
        entry = self._lookup(name)
        if self._fd_for_inode(entry.inode_index) is not None:
            raise AlreadyOpen(f"file {name!r} is already open")
        fd = next((i for i in range(MAX_OPEN_FILES) if i not in self.fd_table), None)
        if fd is None:
            raise FdTableFull(f"all {MAX_OPEN_FILES} file descriptors are in use")
        self.fd_table[fd] = OpenFile(fd, entry.inode_index, name, mode)
        return fd

    def close_file(self, fd: int) -> None:
        self._live()
        if self.fd_table.pop(fd, None) is None:
            raise BadFd(f"file descriptor {fd} is not open")

    # -- content ---------------------------------------------------------------

    def _content(self, inode_index: int) -> bytes:
        node = self.inodes[inode_index]
        data, _ = inodes_mod.walk_chain(self.device, self.geometry, node)
        raw = b"".join(self.device.read_block(b) for b in data)
        return raw[:node.file_size]

    def _check_capacity(self, old_size: int, new_size: int) -> None:
        need = inodes_mod.blocks_required(old_size, new_size, self.geometry)
        free = self.superblock.free_data_blocks()
        if need > free:
            raise DiskFull(f"need {need} blocks, {free} free")

    def _store(self, inode_index: int, data: bytes, first_block: int = 0) -> None:
        """Write ``data`` into logical blocks from ``first_block`` on, growing or
        shrinking the chain so the file is exactly ``first_block`` blocks plus data."""
        g = self.geometry
        node = self.inodes[inode_index]
        bs = g.block_size
        keep = inodes_mod.blocks_for_size(first_block * bs + len(data), bs)
        inodes_mod.truncate_chain(self.device, g, node, keep, self.superblock.datablock_freelist)
        for i in range(first_block, keep):
            block = inodes_mod.resolve_block(self.device, g, node, i, True,
                                             self.superblock.datablock_freelist)
            chunk = data[(i - first_block) * bs:(i - first_block + 1) * bs]
            self.device.write_block(block, chunk.ljust(bs, b"\0"))
        node.file_size = first_block * bs + len(data)

    def read_file(self, fd: int) -> bytes:
        self._live()
        of = self._open(fd, Mode.READ)
        return self._content(of.inode_index)

    def write_file(self, fd: int, data: bytes) -> int:
        """Replace the whole file content with ``data``."""
        self._live()
        of = self._open(fd, Mode.WRITE)
        data = bytes(data)
        self._check_capacity(self.inodes[of.inode_index].file_size, len(data))
        self._store(of.inode_index, data)
        return len(data)

    def append_file(self, fd: int, data: bytes) -> int:
        self._live()
        of = self._open(fd, Mode.APPEND)
        data = bytes(data)
        node = self.inodes[of.inode_index]
        old = node.file_size
        self._check_capacity(old, old + len(data))
        if not data:
            return 0
        bs = self.geometry.block_size
        first = old // bs
        head = b""
        if old % bs:
            block = inodes_mod.resolve_block(self.device, self.geometry, node, first, False,
                                             self.superblock.datablock_freelist)
            head = self.device.read_block(block)[:old % bs]
        self._store(of.inode_index, head + data, first)
        return len(data)

    def transform_file(self, name: str, fn) -> None:
        """Rewrite a closed file's bytes in place with ``fn`` (length-preserving)."""
        self._live()
        entry = self._lookup(name)
        if self._fd_for_inode(entry.inode_index) is not None:
            raise FileOpen(f"file {name!r} is open; close it first")
        old = self._content(entry.inode_index)
        new = fn(old)
        if len(new) != len(old):
            raise ValueError("transform must preserve length")
        self._store(entry.inode_index, new)

    def file_size(self, name: str) -> int:
        return self.inodes[self._lookup(name).inode_index].file_size

    # -- listings --------------------------------------------------------------

    def list_files(self):
        self._live()
        return sorted((e.name, e.inode_index) for e in self.file_map if not e.free)

    def list_open_files(self):
        self._live()
        return [(fd, of.name, of.mode) for fd, of in sorted(self.fd_table.items())]

    # -- persistence -----------------------------------------------------------

    def audit(self) -> None:
        sb = self.superblock
        inodes_mod.audit(self.device, self.geometry, self.inodes, sb.inode_freelist, sb.datablock_freelist)

    def sync(self) -> None:
        self._live()
        store_structures(self.device, self.superblock, self.inodes, self.file_map)
        self.device.flush()

    def unmount(self) -> None:
        self._live()
        self.fd_table.clear()
        self.sync()
        self.device.close()
        self.device = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        if self.device is not None:
            self.unmount()


def create_file(m: Mount, name: str) -> int:
    return m.create_file(name)


def delete_file(m: Mount, name: str) -> None:
    m.delete_file(name)


def open_file(m: Mount, name: str, mode) -> int:
    return m.open_file(name, mode)


def close_file(m: Mount, fd: int) -> None:
    m.close_file(fd)


def read_file(m: Mount, fd: int) -> bytes:
    return m.read_file(fd)


def write_file(m: Mount, fd: int, data: bytes) -> int:
    return m.write_file(fd, data)


def append_file(m: Mount, fd: int, data: bytes) -> int:
    return m.append_file(fd, data)


def list_files(m: Mount):
    return m.list_files()


def list_open_files(m: Mount):
    return m.list_open_files()


def unmount(m: Mount) -> None:
    m.unmount()
