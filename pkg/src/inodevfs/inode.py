"""Logical-to-physical block mapping through direct and indirect pointers.

Logical block ``n`` of a file lives in:

* ``direct[n]`` for ``n < 10``;
* entry ``n - 10`` of the single-indirect pointer block for ``n < 10 + P``;
* otherwise, with ``k = n - 10 - P``, entry ``k % P`` of the level-2 block
  named by entry ``k // P`` of the double-indirect block,

where ``P`` is the number of 4-byte pointers per block. Pointer blocks are
initialised to all -1 so holes are detectable. Allocation is lowest-free
first and proceeds strictly in logical order.
"""

import struct

from .errors import CorruptImage, DiskFull, Exhausted, FileTooLarge, NotAllocated
from .layout import NO_BLOCK, NUM_DIRECT, Geometry, Inode


def max_logical_blocks(geometry: Geometry) -> int:
    p = geometry.pointers_per_block
    return NUM_DIRECT + p + p * p


def max_file_size(geometry: Geometry) -> int:
    return max_logical_blocks(geometry) * geometry.block_size


def blocks_for_size(size: int, block_size: int) -> int:
    """Data blocks owned by a file of ``size`` bytes (never fewer than one)."""
    return max(1, -(-size // block_size))


def pointer_blocks_for(nblocks: int, p: int) -> int:
    """Pointer blocks needed to address ``nblocks`` logical blocks."""
    if nblocks <= NUM_DIRECT:
        return 0
    if nblocks <= NUM_DIRECT + p:
        return 1
    return 2 + -(-(nblocks - NUM_DIRECT - p) // p)


def blocks_required(old_size: int, new_size: int, geometry: Geometry) -> int:
    """Extra data plus pointer blocks needed to grow a file from old_size to new_size."""
    limit = max_file_size(geometry)
    if not 0 <= old_size <= limit or new_size < 0:
        raise FileTooLarge(f"size outside [0, {limit}]")
    if new_size > limit:
        raise FileTooLarge(f"{new_size} bytes exceeds the {limit}-byte maximum")
    bs, p = geometry.block_size, geometry.pointers_per_block
    old_n, new_n = blocks_for_size(old_size, bs), blocks_for_size(new_size, bs)
    if new_n <= old_n:
        return 0
    return (new_n - old_n) + pointer_blocks_for(new_n, p) - pointer_blocks_for(old_n, p)


def allocate_lowest(freelist: bytearray) -> int:
    index = freelist.find(0)
    if index < 0:
        raise Exhausted("no free entry")
    freelist[index] = 1
    return index


def _read_pointers(dev, block: int) -> list:
    raw = dev.read_block(block)
    return list(struct.unpack(f"<{len(raw) // 4}i", raw))


def _write_pointers(dev, block: int, ptrs) -> None:
    dev.write_block(block, struct.pack(f"<{len(ptrs)}i", *ptrs))


def _check_ptr(geometry: Geometry, ptr: int) -> int:
    if not geometry.data_start <= ptr < geometry.disk_blocks:
        raise CorruptImage(f"pointer {ptr} outside the data region")
    return ptr


class _Allocator:
    """Hands out data blocks; pointer blocks come back initialised to -1."""

    def __init__(self, dev, geometry, freelist):
        self.dev, self.geometry, self.freelist = dev, geometry, freelist

    def take(self, pointer_block: bool) -> int:
        try:
            block = allocate_lowest(self.freelist)
        except Exhausted:
            raise DiskFull("no free data block") from None
        if pointer_block:
            _write_pointers(self.dev, block, [NO_BLOCK] * self.geometry.pointers_per_block)
        return block


def _follow(alloc, geometry, container: int, slot: int, allocate: bool, pointer_block: bool) -> int:
    ptrs = _read_pointers(alloc.dev, container)
    target = ptrs[slot]
    if target == NO_BLOCK:
        if not allocate:
            raise NotAllocated(f"hole at entry {slot} of block {container}")
        target = alloc.take(pointer_block)
        ptrs[slot] = target
        _write_pointers(alloc.dev, container, ptrs)
    return _check_ptr(geometry, target)


def resolve_block(dev, geometry: Geometry, inode: Inode, logical: int, allocate: bool,
                  freelist: bytearray) -> int:
    """Physical block holding ``logical``; with ``allocate``, fill in any missing link."""
    p = geometry.pointers_per_block
    if not 0 <= logical < max_logical_blocks(geometry):
        raise FileTooLarge(f"logical block {logical} beyond the pointer tree")
    alloc = _Allocator(dev, geometry, freelist)

    def root(current: int) -> int:
        if current == NO_BLOCK:
            if not allocate:
                raise NotAllocated(f"logical block {logical} is not allocated")
            return alloc.take(pointer_block=True)
        return _check_ptr(geometry, current)

    if logical < NUM_DIRECT:
        if inode.direct[logical] == NO_BLOCK:
            if not allocate:
                raise NotAllocated(f"logical block {logical} is not allocated")
            inode.direct[logical] = alloc.take(pointer_block=False)
        return _check_ptr(geometry, inode.direct[logical])
    k = logical - NUM_DIRECT
    if k < p:
        inode.single_indirect = root(inode.single_indirect)
        return _follow(alloc, geometry, inode.single_indirect, k, allocate, False)
    k -= p
    inode.double_indirect = root(inode.double_indirect)
    level2 = _follow(alloc, geometry, inode.double_indirect, k // p, allocate, True)
    return _follow(alloc, geometry, level2, k % p, allocate, False)


def walk_chain(dev, geometry: Geometry, inode: Inode):
    """Every block reachable from ``inode``: (data blocks in logical order, pointer blocks).

    Follows whatever pointers are present rather than trusting file_size, so
    the result is usable for auditing.
    """
    data = [_check_ptr(geometry, b) for b in inode.direct if b != NO_BLOCK]
    meta = []
    if inode.single_indirect != NO_BLOCK:
        meta.append(_check_ptr(geometry, inode.single_indirect))
        data += [_check_ptr(geometry, b) for b in _read_pointers(dev, inode.single_indirect) if b != NO_BLOCK]
    if inode.double_indirect != NO_BLOCK:
        meta.append(_check_ptr(geometry, inode.double_indirect))
        for l2 in _read_pointers(dev, inode.double_indirect):
            if l2 == NO_BLOCK:
                continue
            meta.append(_check_ptr(geometry, l2))
            data += [_check_ptr(geometry, b) for b in _read_pointers(dev, l2) if b != NO_BLOCK]
    return data, meta


def truncate_chain(dev, geometry: Geometry, inode: Inode, keep: int, freelist: bytearray) -> int:
    """Release logical blocks ``>= keep`` and any pointer block left empty.

    Returns the number of blocks released. Assumes the chain is contiguous
    in logical order. file_size is left to the caller.
    """
    p = geometry.pointers_per_block
    freed = 0

    def release(block: int) -> None:
        nonlocal freed
        _check_ptr(geometry, block)
        freelist[block] = 0
        freed += 1

    for i in range(keep, NUM_DIRECT):
        if inode.direct[i] != NO_BLOCK:
            release(inode.direct[i])
            inode.direct[i] = NO_BLOCK

    if inode.single_indirect != NO_BLOCK:
        start = max(keep - NUM_DIRECT, 0)
        ptrs = _read_pointers(dev, _check_ptr(geometry, inode.single_indirect))
        dirty = False
        for j in range(start, p):
            if ptrs[j] != NO_BLOCK:
                release(ptrs[j])
                ptrs[j] = NO_BLOCK
                dirty = True
        if start == 0:
            release(inode.single_indirect)
            inode.single_indirect = NO_BLOCK
        elif dirty:
            _write_pointers(dev, inode.single_indirect, ptrs)

    if inode.double_indirect != NO_BLOCK:
        start = max(keep - NUM_DIRECT - p, 0)
        roots = _read_pointers(dev, _check_ptr(geometry, inode.double_indirect))
        roots_dirty = False
        for j, l2 in enumerate(roots):
            if l2 == NO_BLOCK:
                continue
            first = max(start - j * p, 0)
            if first >= p:
                continue
            ptrs = _read_pointers(dev, _check_ptr(geometry, l2))
            dirty = False
            for m in range(first, p):
                if ptrs[m] != NO_BLOCK:
                    release(ptrs[m])
                    ptrs[m] = NO_BLOCK
                    dirty = True
            if first == 0:
                release(l2)
                roots[j] = NO_BLOCK
                roots_dirty = True
            elif dirty:
                _write_pointers(dev, l2, ptrs)
        if start == 0:
            release(inode.double_indirect)
            inode.double_indirect = NO_BLOCK
        elif roots_dirty:
            _write_pointers(dev, inode.double_indirect, roots)
    return freed


def free_chain(dev, geometry: Geometry, inode: Inode, freelist: bytearray) -> int:
    """Release every block of ``inode`` and reset it; returns blocks freed."""
    freed = truncate_chain(dev, geometry, inode, 0, freelist)
    inode.reset()
    return freed


def audit(dev, geometry: Geometry, inodes, inode_freelist, datablock_freelist) -> None:
    """Check injectivity and conservation of the data-block freelist.

    Every in-use inode's blocks must be distinct, inside the data region,
    exactly as many data blocks as its size requires, and the freelist must
    mark precisely the metadata blocks plus those blocks as in use.
    """
    seen = set(range(geometry.data_start))
    p = geometry.pointers_per_block
    for i, inode in enumerate(inodes):
        if not inode_freelist[i]:
            if any(ptr != NO_BLOCK for ptr in inode.pointers()) or inode.file_size:
                raise CorruptImage(f"free inode {i} is not blank")
            continue
        data, meta = walk_chain(dev, geometry, inode)
        n = blocks_for_size(inode.file_size, geometry.block_size)
        if len(data) != n or len(meta) != pointer_blocks_for(n, p):
            raise CorruptImage(f"inode {i}: {len(data)} data/{len(meta)} pointer blocks for {n} logical")
        for b in data + meta:
            if b in seen:
                raise CorruptImage(f"block {b} referenced twice (inode {i})")
            seen.add(b)
    marked = {i for i, v in enumerate(datablock_freelist) if v}
    if marked != seen:
        raise CorruptImage(f"freelist drift: leaked {sorted(marked - seen)[:5]}, "
                           f"unmarked {sorted(seen - marked)[:5]}")
