"""Persistence for outsourced tuples, document blobs and key material.

A store directory holds::

    store.json      owner public key and format version
    tuples.jsonl    one tuple record per line, in outsourcing order
    blobs/<id>.bin  encrypted document bodies, addressed by document id

Tuple records never contain the document id; the blob directory is the
by-id fetch surface (documents are read directly, without private
information retrieval).
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import StoreError
from .pctd import RECORD_VERSION, PublicParams, StrongKeyShares, UserKeyPair, hex_to_int, int_to_hex
from .secure_index import OutsourcedTuple


class MemoryStore:
    """Tuples in outsourcing order plus blobs keyed by document id."""

    def __init__(self, owner_pk: int | None = None):
        self.owner_pk = owner_pk
        self.tuples: list[OutsourcedTuple] = []
        self._blobs: dict[int, bytes] = {}

    def __len__(self) -> int:
        return len(self.tuples)

    def append(self, doc_id: int, tup: OutsourcedTuple) -> None:
        if doc_id in self._blobs:
            raise StoreError(f"document {doc_id} already stored")
        self.tuples.append(tup)
        self._blobs[doc_id] = tup.doc_blob

    def fetch(self, doc_id: int) -> bytes:
        try:
            return self._blobs[doc_id]
        except KeyError:
            raise StoreError(f"no document with id {doc_id}") from None

    def replace_blob(self, doc_id: int, blob: bytes) -> None:
        self.fetch(doc_id)
        self._blobs[doc_id] = blob


class DirectoryStore(MemoryStore):
    """Append-only on-disk store; loads everything eagerly."""

    def __init__(self, path, owner_pk: int | None = None):
        super().__init__(owner_pk)
        self.path = Path(path)
        meta = self.path / "store.json"
        if meta.exists():
            rec = json.loads(meta.read_text())
            if rec.get("version") != RECORD_VERSION or rec.get("kind") != "store":
                raise StoreError(f"{meta} is not a version-{RECORD_VERSION} store")
            stored_pk = hex_to_int(rec["owner_pk"])
            if owner_pk is not None and owner_pk != stored_pk:
                raise StoreError("store belongs to a different owner key")
            self.owner_pk = stored_pk
            self._load()
        else:
            if owner_pk is None:
                raise StoreError(f"{self.path} is not a store")
            (self.path / "blobs").mkdir(parents=True, exist_ok=True)
            meta.write_text(json.dumps({"version": RECORD_VERSION, "kind": "store", "owner_pk": int_to_hex(owner_pk)}))
            (self.path / "tuples.jsonl").touch()

    def _blob_path(self, doc_id: int) -> Path:
        return self.path / "blobs" / f"{int_to_hex(doc_id)}.bin"

    def _load(self) -> None:
        with open(self.path / "tuples.jsonl", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if line.strip():
                    try:
                        self.tuples.append(OutsourcedTuple.from_record(json.loads(line)))
                    except (ValueError, KeyError) as exc:
                        raise StoreError(f"tuples.jsonl:{lineno}: {exc}") from None

    def append(self, doc_id: int, tup: OutsourcedTuple) -> None:
        if self._blob_path(doc_id).exists():
            raise StoreError(f"document {doc_id} already stored")
        self._blob_path(doc_id).write_bytes(tup.doc_blob)
        with open(self.path / "tuples.jsonl", "a", encoding="utf-8") as fh:
            fh.write(json.dumps(tup.to_record(), separators=(",", ":")) + "\n")
        self.tuples.append(tup)

    def fetch(self, doc_id: int) -> bytes:
        p = self._blob_path(doc_id)
        if not p.exists():
            raise StoreError(f"no document with id {doc_id}")
        return p.read_bytes()

    def replace_blob(self, doc_id: int, blob: bytes) -> None:
        self.fetch(doc_id)
        self._blob_path(doc_id).write_bytes(blob)


# -- key files ---------------------------------------------------------------------


def write_record(path, record: dict) -> None:
    Path(path).write_text(json.dumps(record, indent=1, sort_keys=True) + "\n")


def read_record(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise StoreError(f"key file {path} not found")
    try:
        return json.loads(path.read_text())
    except ValueError as exc:
        raise StoreError(f"{path}: {exc}") from None


def share_record(role: str, value: int) -> dict:
    return {"version": RECORD_VERSION, "kind": "share", "role": role, "value": int_to_hex(value)}


def read_share(path, role: str) -> int:
    rec = read_record(path)
    if rec.get("kind") != "share" or rec.get("version") != RECORD_VERSION:
        raise StoreError(f"{path} is not a key-share record")
    if rec.get("role") != role:
        raise StoreError(f"{path} holds the {rec.get('role')} share, expected {role}")
    return hex_to_int(rec["value"])


def public_key_record(pk: int) -> dict:
    return {"version": RECORD_VERSION, "kind": "public-key", "pk": int_to_hex(pk)}


def read_public_key(path) -> int:
    rec = read_record(path)
    if rec.get("kind") == "user-key":
        return hex_to_int(rec["pk"])
    if rec.get("kind") != "public-key":
        raise StoreError(f"{path} is not a public-key record")
    return hex_to_int(rec["pk"])


class KeyDir:
    """The directory layout written by ``keygen``."""

    PARAMS = "params.json"
    CP_SHARE = "cp.share"
    CSP_SHARE = "csp.share"
    OWNER = "owner.key"
    USER = "user.key"

    def __init__(self, path):
        self.path = Path(path)

    def write(self, params: PublicParams, shares: StrongKeyShares, owner: UserKeyPair, user: UserKeyPair) -> None:
        self.path.mkdir(parents=True, exist_ok=True)
        write_record(self.path / self.PARAMS, params.to_record())
        write_record(self.path / self.CP_SHARE, share_record("cp", shares.lambda1))
        write_record(self.path / self.CSP_SHARE, share_record("csp", shares.lambda2))
        write_record(self.path / self.OWNER, owner.to_record())
        write_record(self.path / self.USER, user.to_record())
        write_record(self.path / "owner.pub", public_key_record(owner.pk))
        write_record(self.path / "user.pub", public_key_record(user.pk))

    def params(self) -> PublicParams:
        return PublicParams.from_record(read_record(self.path / self.PARAMS))

    def cp_share(self) -> int:
        return read_share(self.path / self.CP_SHARE, "cp")

    def csp_share(self) -> int:
        return read_share(self.path / self.CSP_SHARE, "csp")

    def owner(self) -> UserKeyPair:
        return UserKeyPair.from_record(read_record(self.path / self.OWNER))

    def user(self) -> UserKeyPair:
        return UserKeyPair.from_record(read_record(self.path / self.USER))
