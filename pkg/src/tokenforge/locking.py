"""Advisory exclusive-writer lock, one per dataset, next to the .idx file."""

from __future__ import annotations

import os
import time

from .errors import IoFailure, LockNotHeld
from .paths import DatasetPaths


class WriterLock:
    """Exclusive advisory lock backed by O_CREAT|O_EXCL on ``<idx>.lock``.

    Readers never take it; every mutating operation must. Usable as a
    context manager. Reentrant within one instance.
    """

    def __init__(self, paths: DatasetPaths):
        self._path = paths.lock
        self._depth = 0

    @property
    def held(self) -> bool:
        return self._depth > 0

    def acquire(self, timeout: float = 10.0, poll: float = 0.05) -> None:
        if self._depth > 0:
            self._depth += 1
            return
        deadline = time.monotonic() + timeout
        while True:
            try:
                fd = os.open(self._path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
                os.write(fd, f"{os.getpid()}\n".encode())
                os.close(fd)
                self._depth = 1
                return
            except FileExistsError:
                if time.monotonic() >= deadline:
                    raise IoFailure(
                        f"writer lock busy: {self._path} (held by another writer)"
                    ) from None
                time.sleep(poll)

    def release(self) -> None:
        if self._depth == 0:
            raise LockNotHeld(f"lock {self._path} not held")
        self._depth -= 1
        if self._depth == 0:
            try:
                os.unlink(self._path)
            except FileNotFoundError:
                pass

    def require(self) -> None:
        """Raise LockNotHeld unless this instance currently holds the lock."""
        if not self.held:
            raise LockNotHeld(
                f"operation requires the exclusive writer lock {self._path}"
            )

    def __enter__(self) -> "WriterLock":
        self.acquire()
        return self

    def __exit__(self, *exc) -> None:
        self.release()
