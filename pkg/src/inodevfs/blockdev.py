"""A block-addressable disk emulated inside one host file.

All I/O is whole-block. A handle is single-owner: it may be handed between
threads but must never be used from two at once, and opening the same image
from two processes is unsupported.
"""

import os

from .errors import AlreadyExists, BadGeometry, IoFailure, NotFound, OutOfRange, WrongLength

MIN_BLOCK_SIZE = 64
MIN_DISK_BLOCKS = 64


def check_geometry(block_size: int, disk_blocks: int) -> None:
    if block_size < MIN_BLOCK_SIZE or block_size % 4:
        raise BadGeometry(f"block size must be >= {MIN_BLOCK_SIZE} and a multiple of 4, got {block_size}")
    if disk_blocks < MIN_DISK_BLOCKS:
        raise BadGeometry(f"disk must have >= {MIN_DISK_BLOCKS} blocks, got {disk_blocks}")


class BlockDevice:
    def __init__(self, path, fileobj, block_size: int, disk_blocks: int):
        self.path = path
        self.block_size = block_size
        self.disk_blocks = disk_blocks
        self._f = fileobj

    @classmethod
    def create(cls, path, block_size: int, disk_blocks: int) -> "BlockDevice":
        """Create a zero-filled image, writing one block-sized buffer at a time."""
        check_geometry(block_size, disk_blocks)
        try:
            f = open(path, "x+b")
        except FileExistsError:
            raise AlreadyExists(f"disk {path} already exists") from None
        except (OSError, ValueError) as e:
            raise IoFailure(str(e)) from e
        zero = bytes(block_size)
        try:
            for _ in range(disk_blocks):
                f.write(zero)
            f.flush()
        except OSError as e:
            f.close()
            raise IoFailure(str(e)) from e
        return cls(path, f, block_size, disk_blocks)

    @classmethod
    def open(cls, path, block_size: int, disk_blocks: int) -> "BlockDevice":
        """Open an existing image whose geometry the caller already knows."""
        try:
            f = open(path, "r+b")
        except FileNotFoundError:
            raise NotFound(f"disk {path} does not exist") from None
        except (OSError, ValueError) as e:
            raise IoFailure(str(e)) from e
        return cls(path, f, block_size, disk_blocks)

    def _check_index(self, index: int) -> None:
        if not 0 <= index < self.disk_blocks:
            raise OutOfRange(f"block {index} outside [0, {self.disk_blocks})")

    def read_block(self, index: int) -> bytes:
        self._check_index(index)
        try:
            self._f.seek(index * self.block_size)
            data = self._f.read(self.block_size)
        except OSError as e:
            raise IoFailure(str(e)) from e
        if len(data) != self.block_size:
            raise IoFailure(f"short read at block {index}")
        return data

    def write_block(self, index: int, data) -> None:
        self._check_index(index)
        if len(data) != self.block_size:
            raise WrongLength(f"expected {self.block_size} bytes, got {len(data)}")
        try:
            self._f.seek(index * self.block_size)
            self._f.write(data)
        except OSError as e:
            raise IoFailure(str(e)) from e

    def flush(self) -> None:
        try:
            self._f.flush()
            os.fsync(self._f.fileno())
        except OSError as e:
            raise IoFailure(str(e)) from e

    def close(self) -> None:
        if self._f is not None:
            self.flush()
            self._f.close()
            self._f = None

    @property
    def closed(self) -> bool:
        return self._f is None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def create_image(path, block_size: int, disk_blocks: int) -> BlockDevice:
    return BlockDevice.create(path, block_size, disk_blocks)


def read_block(dev: BlockDevice, index: int) -> bytes:
    return dev.read_block(index)


def write_block(dev: BlockDevice, index: int, data) -> None:
    dev.write_block(index, data)


def flush(dev: BlockDevice) -> None:
    dev.flush()


def open_image(path) -> BlockDevice:
    """Open an image, taking its geometry from the on-disk header."""
    from .layout import read_header

    block_size, disk_blocks = read_header(path)
    return BlockDevice.open(path, block_size, disk_blocks)
