"""Persistence for flattened grid-heatmap vectors.

Two interchangeable backends sit behind one interface: a SQL-92
relational table (sqlite3 built in; any DB-API connection plugs into
the same seam) and an append-only binary file whose batches commit via
temp-file-then-rename, so readers never observe a partial write.

Record ids are assigned by the store and strictly increase. Vectors are
stored as little-endian float32, one blob per record.
"""

from __future__ import annotations

import os
import shutil
import sqlite3
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import ConnectionFailed, SchemaMismatch, StorageError, ValidationError

FILE_MAGIC = b"VLVS"
FILE_VERSION = 1
_HEADER = struct.Struct("<4sHHQ")  # magic, version, grid_size, record count

DDL = [
    "CREATE TABLE IF NOT EXISTS trajectory_vectors ("
    " record_id BIGINT PRIMARY KEY,"
    " user_id VARCHAR(64) NOT NULL,"
    " label SMALLINT NOT NULL,"
    " vec BLOB NOT NULL,"
    " created_at BIGINT NOT NULL)",
    "CREATE INDEX IF NOT EXISTS idx_tv_user ON trajectory_vectors(user_id)",
    "CREATE INDEX IF NOT EXISTS idx_tv_label ON trajectory_vectors(label)",
]


@dataclass(frozen=True)
class VectorRecord:
    record_id: int
    user: str
    label: int
    vector: np.ndarray  # (grid_size^2,) float32
    created_at: int     # UTC seconds

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, VectorRecord)
            and self.record_id == other.record_id
            and self.user == other.user
            and self.label == other.label
            and self.created_at == other.created_at
            and np.array_equal(self.vector, other.vector)
        )


def _validate(record: VectorRecord, vector_len: int) -> np.ndarray:
    vec = np.asarray(record.vector, dtype="<f4")
    if vec.ndim != 1 or vec.size != vector_len:
        raise ValidationError(
            f"vector length {vec.size} != expected {vector_len}"
        )
    if not 0 <= record.label <= 6:
        raise ValidationError(f"label {record.label} outside 0..6")
    return vec


class VectorStore:
    """Interface both backends implement."""

    def init_schema(self) -> None:
        raise NotImplementedError

    def insert_batch(self, records: Sequence[VectorRecord]) -> int:
        raise NotImplementedError

    def fetch(self, user: str | None = None, label: int | None = None,
              id_range: tuple[int, int] | None = None) -> list[VectorRecord]:
        raise NotImplementedError

    def count(self) -> int:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class SqlVectorStore(VectorStore):
    """Vector records in a relational table via a DB-API connection.

    Uses only SQL-92 statements plus qmark parameters, so any driver
    with a qmark paramstyle works; sqlite3 is the built-in choice. Pass
    the driver's base exception class for non-sqlite connections.
    """

    def __init__(self, connection, grid_size: int = 10,
                 error_class: type[Exception] = sqlite3.Error):
        self._conn = connection
        self.grid_size = grid_size
        self._vector_len = grid_size * grid_size
        self._error_class = error_class

    def init_schema(self) -> None:
        try:
            cur = self._conn.cursor()
            for statement in DDL:
                cur.execute(statement)
            self._conn.commit()
            # Probe the expected columns: an existing table with a
            # different layout fails here, not at first insert.
            cur.execute(
                "SELECT record_id, user_id, label, vec, created_at"
                " FROM trajectory_vectors WHERE 1=0"
            )
        except self._error_class as exc:
            raise SchemaMismatch(f"schema init failed: {exc}") from exc

    def insert_batch(self, records: Sequence[VectorRecord]) -> int:
        if not records:
            return 0
        vectors = [_validate(r, self._vector_len) for r in records]
        cur = self._conn.cursor()
        try:
            cur.execute("SELECT MAX(record_id) FROM trajectory_vectors")
            row = cur.fetchone()
            next_id = (row[0] or 0) + 1
            cur.executemany(
                "INSERT INTO trajectory_vectors"
                " (record_id, user_id, label, vec, created_at)"
                " VALUES (?, ?, ?, ?, ?)",
                [
                    (next_id + i, r.user, r.label, vec.tobytes(), r.created_at)
                    for i, (r, vec) in enumerate(zip(records, vectors))
                ],
            )
            self._conn.commit()
        except self._error_class as exc:
            self._conn.rollback()
            raise StorageError(f"insert failed: {exc}") from exc
        return len(records)

    def fetch(self, user=None, label=None, id_range=None) -> list[VectorRecord]:
        clauses, args = [], []
        if user is not None:
            clauses.append("user_id = ?")
            args.append(user)
        if label is not None:
            clauses.append("label = ?")
            args.append(label)
        if id_range is not None:
            clauses.append("record_id >= ? AND record_id <= ?")
            args.extend(id_range)
        sql = "SELECT record_id, user_id, label, vec, created_at FROM trajectory_vectors"
        if clauses:
            sql += " WHERE " + " AND ".join(clauses)
        sql += " ORDER BY record_id"
        try:
            rows = self._conn.cursor().execute(sql, args).fetchall()
        except self._error_class as exc:
            raise StorageError(f"fetch failed: {exc}") from exc
        return [
            VectorRecord(
                record_id=rid, user=uid, label=lbl,
                vector=np.frombuffer(blob, dtype="<f4").copy(),
                created_at=created,
            )
            for rid, uid, lbl, blob, created in rows
        ]

    def count(self) -> int:
        try:
            cur = self._conn.cursor()
            cur.execute("SELECT COUNT(*) FROM trajectory_vectors")
            return int(cur.fetchone()[0])
        except self._error_class as exc:
            raise StorageError(f"count failed: {exc}") from exc

    def close(self) -> None:
        self._conn.close()


class FileVectorStore(VectorStore):
    """Append-only binary store.

    Header: magic "VLVS", version u16, grid_size u16, record count u64.
    Each record: record_id u64, user length u16 + UTF-8 bytes, label u8,
    created_at i64, then grid_size^2 little-endian float32 values.
    Batches append to a temp copy which atomically replaces the file.
    """

    def __init__(self, path: str | Path, grid_size: int = 10):
        self.path = Path(path)
        self.grid_size = grid_size
        self._vector_len = grid_size * grid_size
        if not self.path.parent.is_dir():
            raise ConnectionFailed(f"directory {self.path.parent} does not exist")

    def init_schema(self) -> None:
        if self.path.exists():
            self._read_header()  # validates magic/version/grid size
            return
        self._write_atomic(self._pack_header(0), append_to=None)

    def _pack_header(self, count: int) -> bytes:
        return _HEADER.pack(FILE_MAGIC, FILE_VERSION, self.grid_size, count)

    def _read_header(self) -> int:
        try:
            with open(self.path, "rb") as fh:
                raw = fh.read(_HEADER.size)
        except OSError as exc:
            raise ConnectionFailed(str(exc)) from exc
        if len(raw) < _HEADER.size:
            raise SchemaMismatch("file too short for store header")
        magic, version, grid_size, count = _HEADER.unpack(raw)
        if magic != FILE_MAGIC:
            raise SchemaMismatch("not a vector store file (bad magic)")
        if version != FILE_VERSION:
            raise SchemaMismatch(f"unsupported store version {version}")
        if grid_size != self.grid_size:
            raise SchemaMismatch(
                f"store grid size {grid_size} != requested {self.grid_size}"
            )
        return count

    def _write_atomic(self, header: bytes, append_to: Path | None,
                      payload: bytes = b"") -> None:
        fd, tmp_name = tempfile.mkstemp(dir=self.path.parent,
                                        prefix=self.path.name + ".")
        try:
            with os.fdopen(fd, "wb") as out:
                if append_to is not None:
                    with open(append_to, "rb") as src:
                        src.seek(_HEADER.size)
                        out.write(header)
                        shutil.copyfileobj(src, out)
                else:
                    out.write(header)
                out.write(payload)
                out.flush()
                os.fsync(out.fileno())
            os.replace(tmp_name, self.path)
        except OSError as exc:
            os.unlink(tmp_name)
            raise StorageError(f"write failed: {exc}") from exc

    def _iter_records(self) -> Iterator[VectorRecord]:
        data = self.path.read_bytes()
        offset = _HEADER.size
        vec_bytes = 4 * self._vector_len
        while offset < len(data):
            record_id, user_len = struct.unpack_from("<QH", data, offset)
            offset += 10
            user = data[offset:offset + user_len].decode("utf-8")
            offset += user_len
            label, created_at = struct.unpack_from("<Bq", data, offset)
            offset += 9
            vector = np.frombuffer(data, dtype="<f4", count=self._vector_len,
                                   offset=offset).copy()
            offset += vec_bytes
            yield VectorRecord(record_id=record_id, user=user, label=label,
                               vector=vector, created_at=created_at)

    def insert_batch(self, records: Sequence[VectorRecord]) -> int:
        if not records:
            return 0
        count = self._read_header()
        vectors = [_validate(r, self._vector_len) for r in records]
        next_id = max((r.record_id for r in self._iter_records()), default=0) + 1
        blob = bytearray()
        for i, (record, vec) in enumerate(zip(records, vectors)):
            user = record.user.encode("utf-8")
            blob += struct.pack("<QH", next_id + i, len(user))
            blob += user
            blob += struct.pack("<Bq", record.label, record.created_at)
            blob += vec.tobytes()
        self._write_atomic(self._pack_header(count + len(records)),
                           append_to=self.path, payload=bytes(blob))
        return len(records)

    def fetch(self, user=None, label=None, id_range=None) -> list[VectorRecord]:
        self._read_header()
        out = []
        for record in self._iter_records():
            if user is not None and record.user != user:
                continue
            if label is not None and record.label != label:
                continue
            if id_range is not None and not (id_range[0] <= record.record_id <= id_range[1]):
                continue
            out.append(record)
        out.sort(key=lambda r: r.record_id)
        return out

    def count(self) -> int:
        return self._read_header()

    def close(self) -> None:
        pass


def open_store(descriptor: str, grid_size: int = 10) -> VectorStore:
    """Open a store from a descriptor.

    "sqlite:<path>" (also "sqlite://<path>") selects the SQL backend;
    an empty path or ":memory:" gives an in-memory database. Any other
    descriptor is a file path for the binary backend.
    """
    if descriptor.startswith("sqlite:"):
        path = descriptor.removeprefix("sqlite:")
        if path.startswith("//"):
            path = path[2:]
        target = ":memory:" if path in ("", ":memory:") else path
        try:
            conn = sqlite3.connect(target)
        except sqlite3.Error as exc:
            raise ConnectionFailed(f"cannot open {descriptor}: {exc}") from exc
        return SqlVectorStore(conn, grid_size=grid_size)
    return FileVectorStore(descriptor, grid_size=grid_size)
