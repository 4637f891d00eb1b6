"""Exception hierarchy shared by every layer of the filesystem."""


class VFSError(Exception):
    """Base class; the shell reports any of these without aborting."""


# block device / image
class AlreadyExists(VFSError):
    pass


class NotFound(VFSError):
    pass


class IoFailure(VFSError):
    pass


class BadGeometry(VFSError):
    pass


class OutOfRange(VFSError):
    pass


class WrongLength(VFSError):
    pass


class CorruptImage(VFSError):
    pass


# allocation / pointer resolution
class FileTooLarge(VFSError):
    pass


class NotAllocated(VFSError):
    pass


class DiskFull(VFSError):
    pass


class Exhausted(VFSError):
    pass


# file operations
class InvalidName(VFSError):
    pass


class DuplicateName(VFSError):
    pass


class NoFreeInode(VFSError):
    pass


class MapFull(VFSError):
    pass


class FileOpen(VFSError):
    pass


class AlreadyOpen(VFSError):
    pass


class FdTableFull(VFSError):
    pass


class InvalidMode(VFSError):
    pass


class BadFd(VFSError):
    pass


class WrongMode(VFSError):
    pass


# security
class AuthRequired(VFSError):
    pass


class AuthFailed(VFSError):
    pass


class InvalidChoice(VFSError):
    pass


class InvalidCredentials(VFSError):
    pass
