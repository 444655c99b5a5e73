"""Content-addressed artifact store.

Blobs live at ``blobs/<first two hex>/<sha256>`` under the store root;
writes are atomic and idempotent, so concurrent writers and repeated
runs converge on identical layouts.  Manifests reference blobs by this
relative path, which keeps them byte-identical across machines.
"""

from __future__ import annotations

import hashlib
import os
from pathlib import Path

from .errors import NotFoundError

_HEX = set("0123456789abcdef")


class ArtifactStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)

    @staticmethod
    def digest_of(data: bytes) -> str:
        return hashlib.sha256(data).hexdigest()

    @staticmethod
    def rel_path(digest: str) -> str:
        return f"blobs/{digest[:2]}/{digest}"

    def put_bytes(self, data: bytes) -> tuple[str, str]:
        """Store a blob; returns (digest, relative path)."""
        digest = self.digest_of(data)
        rel = self.rel_path(digest)
        path = self.root / rel
        if not path.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_name(path.name + ".part")
            tmp.write_bytes(data)
            os.replace(tmp, path)
        return digest, rel

    def _checked(self, digest: str) -> Path:
        digest = digest.lower()
        if len(digest) != 64 or not set(digest) <= _HEX:
            raise NotFoundError(f"not a valid artifact digest: {digest!r}")
        return self.root / self.rel_path(digest)

    def has(self, digest: str) -> bool:
        try:
            return self._checked(digest).exists()
        except NotFoundError:
            return False

    def get_bytes(self, digest: str) -> bytes:
        path = self._checked(digest)
        if not path.exists():
            raise NotFoundError(f"artifact {digest} not found")
        return path.read_bytes()

    def path_for(self, digest: str) -> Path:
        path = self._checked(digest)
        if not path.exists():
            raise NotFoundError(f"artifact {digest} not found")
        return path
