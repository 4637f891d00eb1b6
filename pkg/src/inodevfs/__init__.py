"""A single-file virtual file system built on inodes with indirect pointers."""

from .blockdev import BlockDevice, create_image, open_image
from .errors import VFSError
from .fscore import Mode, Mount, create_disk, mount
from .layout import Geometry, compute_geometry
from .security import Credentials, crypt_file, set_password, verify

__all__ = [
    "BlockDevice", "create_image", "open_image", "VFSError", "Mode", "Mount", "create_disk",
    "mount", "Geometry", "compute_geometry", "Credentials", "crypt_file", "set_password", "verify",
]
