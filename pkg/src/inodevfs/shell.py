"""Menu-driven front end, usable interactively or from a script file.

In script mode every line consumed from the script is echoed on its own
line after the prompt, so a transcript reads like the interactive session.
Malformed input never ends the loop; only choice 9 at the top menu or the
end of input does.
"""

import argparse
import getpass
import io
import sys

from . import fscore
from .errors import AuthRequired, InvalidChoice, VFSError
from .fscore import Mode
from .layout import DEFAULT_BLOCK_SIZE, DEFAULT_DISK_BLOCKS, DEFAULT_INODES
from .security import Credentials, crypt_file, parse_menu_choice, set_password

SENTINEL = "EOF"
RULE = "====="

TOP_MENU = ["1 : create disk", "2 : mount disk", "9 : exit"]
FILE_MENU = [
    RULE,
    "1 : create file",
    "2 : open file",
    "3 : read file",
    "4 : write file",
    "5 : append file",
    "6 : close file",
    "7 : delete file",
    "8 : list of files",
    "9 : list of opened files",
    "10: unmount",
    RULE,
]
MODE_MENU = ["1 : read", "2 : write", "3 : append"]
MODES = {1: Mode.READ, 2: Mode.WRITE, 3: Mode.APPEND}

# 11 and 12 are accepted but not listed, keeping the printed menu as above.
SET_PASSWORD, CRYPT_FILE = 11, 12
FILE_CHOICES = set(range(1, 13))
FD_RANGE = range(2 ** 31)


def strip_terminator(line: str) -> str:
    if line.endswith("\n"):
        line = line[:-1]
    if line.endswith("\r"):
        line = line[:-1]
    return line


def read_text_until_sentinel(lines) -> bytes:
    """Collect lines up to a line that is exactly ``EOF``.

    Retained lines are joined with newlines plus one trailing newline.
    Running out of lines counts as reaching the sentinel.
    """
    kept = []
    for line in lines:
        line = strip_terminator(line)
        if line == SENTINEL:
            break
        kept.append(line)
    if not kept:
        return b""
    return ("\n".join(kept) + "\n").encode("utf-8")


class _EndOfInput(Exception):
    pass


class Shell:
    def __init__(self, lines, out, echo: bool = True, block_size: int = DEFAULT_BLOCK_SIZE,
                 disk_blocks: int = DEFAULT_DISK_BLOCKS, no_of_inodes: int = DEFAULT_INODES,
                 secret_reader=None):
        self._lines = iter(lines)
        self.out = out
        self.echo = echo
        self.geometry = (block_size, disk_blocks, no_of_inodes)
        self._secret_reader = secret_reader
        self.mount = None

    # -- I/O -------------------------------------------------------------------

    def emit(self, *lines: str) -> None:
        for line in lines:
            self.out.write(line + "\n")

    def _next_line(self):
        line = next(self._lines, None)
        return None if line is None else strip_terminator(line)

    def read_line(self, secret: bool = False) -> str:
        line = self._next_line()
        if line is None:
            raise _EndOfInput
        if self.echo:
            self.emit("*" * len(line) if secret else line)
        return line

    def ask(self, prompt: str, secret: bool = False) -> str:
        self.emit(prompt)
        if secret and self._secret_reader is not None:
            self.out.flush()
            return self._secret_reader()
        return self.read_line(secret)

    def error(self, message) -> None:
        self.emit(f"Error: {message}")

    def _content_lines(self):
        while True:
            line = self._next_line()
            if line is None:
                self.emit("(input ended before EOF; text accepted as entered)")
                return
            if self.echo:
                self.emit(line)
            yield line
            if line == SENTINEL:
                return

    def _ask_fd(self, verb: str) -> int:
        text = self.ask(f"Enter filedescriptor to {verb} :")
        try:
            return parse_menu_choice(text, FD_RANGE)
        except InvalidChoice:
            raise VFSError(f"invalid file descriptor {text!r}") from None

    def _ask_credentials(self, label: str = "") -> Credentials:
        username = self.ask(f"Enter {label}username :")
        password = self.ask(f"Enter {label}password :", secret=True)
        return Credentials(username, password)

    # -- loops -----------------------------------------------------------------

    def run(self) -> int:
        try:
            self._top_loop()
        except _EndOfInput:
            if self.mount is not None and self.mount.mounted:
                self.mount.unmount()
                self.emit(fscore.MSG_UNMOUNTED)
        self.out.flush()
        return 0

    def _top_loop(self) -> None:
        while True:
            self.emit(*TOP_MENU)
            line = self.read_line()
            try:
                choice = parse_menu_choice(line, {1, 2, 9})
            except InvalidChoice as e:
                self.error(e)
                continue
            if choice == 9:
                return
            try:
                if choice == 1:
                    self._create_disk()
                else:
                    self._mount_disk()
            except VFSError as e:
                self.error(e)
                continue
            if self.mount is not None:
                self._file_loop()

    def _create_disk(self) -> None:
        name = self.ask("Enter diskname :")
        if not name:
            raise VFSError("disk name is empty")
        fscore.create_disk(name, *self.geometry)
        self.emit("Disk created successfully!!!")

    def _mount_disk(self) -> None:
        name = self.ask("Enter diskname :")
        if not name:
            raise VFSError("disk name is empty")
        try:
            self.mount = fscore.mount(name)
        except AuthRequired:
            self.mount = fscore.mount(name, self._ask_credentials())
        self.emit(fscore.MSG_MOUNTED)

    def _file_loop(self) -> None:
        m = self.mount
        while True:
            self.emit(*FILE_MENU)
            line = self.read_line()
            try:
                choice = parse_menu_choice(line, FILE_CHOICES)
            except InvalidChoice as e:
                self.error(e)
                continue
            if choice == 10:
                m.unmount()
                self.mount = None
                self.emit(fscore.MSG_UNMOUNTED)
                return
            try:
                self._file_command(m, choice)
            except VFSError as e:
                self.error(e)

    def _file_command(self, m, choice: int) -> None:
        if choice == 1:
            m.create_file(self.ask("Enter filename to create :"))
            self.emit(fscore.MSG_CREATED)
        elif choice == 2:
            name = self.ask("Enter filename to open :")
            self.emit(*MODE_MENU)
            text = self.ask("Enter mode :")
            try:
                mode = MODES[parse_menu_choice(text, MODES)]
            except InvalidChoice:
                raise VFSError(f"invalid mode {text!r}") from None
            fd = m.open_file(name, mode)
            self.emit(fscore.msg_opened(name, fd))
        elif choice == 3:
            data = m.read_file(self._ask_fd("read"))
            text = data.decode("utf-8", errors="replace")
            if text:
                self.out.write(text if text.endswith("\n") else text + "\n")
        elif choice in (4, 5):
            verb, mode = ("write", Mode.WRITE) if choice == 4 else ("append", Mode.APPEND)
            fd = self._ask_fd(verb)
            m.check_fd(fd, mode)
            self.emit("Enter file content :")
            data = read_text_until_sentinel(self._content_lines())
            if choice == 4:
                n = m.write_file(fd, data)
                self.emit(fscore.msg_bytes_written(n), fscore.MSG_WRITTEN)
            else:
                n = m.append_file(fd, data)
                self.emit(fscore.msg_bytes_written(n), fscore.MSG_APPENDED)
        elif choice == 6:
            m.close_file(self._ask_fd("close"))
            self.emit(fscore.MSG_CLOSED)
        elif choice == 7:
            m.delete_file(self.ask("Enter filename to delete :"))
            self.emit(fscore.MSG_DELETED)
        elif choice == 8:
            self.emit(fscore.LIST_HEADER)
            self.emit(*(fscore.list_line(n, i) for n, i in m.list_files()))
        elif choice == 9:
            self.emit(fscore.OPEN_LIST_HEADER)
            self.emit(*(fscore.open_list_line(fd, n, mode) for fd, n, mode in m.list_open_files()))
        elif choice == SET_PASSWORD:
            old = self._ask_credentials("current ") if m.superblock.auth.enabled else None
            set_password(m, self._ask_credentials(), old)
            self.emit("Password set successfully.")
        elif choice == CRYPT_FILE:
            name = self.ask("Enter filename to encrypt/decrypt :")
            key = self.ask("Enter key :", secret=True)
            crypt_file(m, name, key)
            self.emit("File encrypted/decrypted successfully.")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="inodevfs", description="Single-file inode filesystem shell.")
    p.add_argument("--script", metavar="PATH", help="read commands from PATH instead of the terminal")
    p.add_argument("--block-size", type=int, default=DEFAULT_BLOCK_SIZE)
    p.add_argument("--disk-blocks", type=int, default=DEFAULT_DISK_BLOCKS)
    p.add_argument("--inodes", type=int, default=DEFAULT_INODES)
    return p


def run(argv=None, stdin=None, stdout=None) -> int:
    args = build_parser().parse_args(argv)
    stdout = stdout or sys.stdout
    geometry = dict(block_size=args.block_size, disk_blocks=args.disk_blocks, no_of_inodes=args.inodes)
    if args.script is not None:
        try:
            with open(args.script, "rb") as f:
                text = f.read().decode("utf-8", errors="replace")
        except OSError as e:
            print(f"Error: cannot read script: {e}", file=sys.stderr)
            return 1
        return Shell(io.StringIO(text), stdout, echo=True, **geometry).run()
    stdin = stdin or sys.stdin
    secret = (lambda: getpass.getpass("")) if stdin.isatty() else None
    return Shell(stdin, stdout, echo=False, secret_reader=secret, **geometry).run()


def main() -> None:
    sys.exit(run())
