"""File helpers shared by every artifact: schema tags and atomic writes."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    pass


def tag(kind: str, payload: dict) -> dict:
    return {"schema": f"hanabi_qd.{kind}", "version": SCHEMA_VERSION, **payload}


def check_schema(doc: dict, kind: str) -> dict:
    expected = f"hanabi_qd.{kind}"
    if doc.get("schema") != expected:
        raise SchemaError(f"expected a {expected} document, got {doc.get('schema')!r}")
    if doc.get("version") != SCHEMA_VERSION:
        raise SchemaError(
            f"{expected} schema version {doc.get('version')!r} is not supported "
            f"(this build reads version {SCHEMA_VERSION})"
        )
    return doc


def atomic_write_text(path, text: str) -> Path:
    """Write via a temp file in the same directory and rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def write_json(path, doc) -> Path:
    return atomic_write_text(path, dumps(doc))


def read_json(path, kind: str | None = None) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if kind is not None:
        check_schema(doc, kind)
    return doc


def csv_text(header, rows, kind: str | None = None) -> str:
    """CSV text; with ``kind`` the first line is a ``# hanabi_qd.<kind> v<N>`` tag."""
    buf = io.StringIO()
    if kind is not None:
        buf.write(f"# hanabi_qd.{kind} v{SCHEMA_VERSION}\n")
    writer = csv.writer(buf, lineterminator="\n")
    if header is not None:
        writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def write_csv(path, header, rows, kind: str | None = None) -> Path:
    return atomic_write_text(path, csv_text(header, rows, kind))


def _check_csv_tag(line: str, kind: str, path) -> None:
    expected = f"# hanabi_qd.{kind} v"
    if not line.startswith(expected):
        raise SchemaError(f"{path}: expected a hanabi_qd.{kind} CSV, first line is {line.strip()!r}")
    version = line.strip()[len(expected):]
    if version != str(SCHEMA_VERSION):
        raise SchemaError(f"{path}: hanabi_qd.{kind} schema version {version} is not supported "
                          f"(this build reads version {SCHEMA_VERSION})")


def read_csv(path, kind: str | None = None) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        if kind is not None:
            _check_csv_tag(fh.readline(), kind, path)
        return list(csv.DictReader(fh))


def read_csv_rows(path, kind: str | None = None) -> list[list[str]]:
    """Raw rows (no header handling) of a tagged CSV."""
    with open(path, encoding="utf-8", newline="") as fh:
        if kind is not None:
            _check_csv_tag(fh.readline(), kind, path)
        return list(csv.reader(fh))
