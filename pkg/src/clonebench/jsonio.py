"""Canonical JSON persistence: versioned documents, byte-stable dumps."""
import json
import os

from .errors import DataFormatError

SCHEMA_VERSION = 1


def dumps_canonical(obj) -> str:
    """Serialize with sorted keys and fixed separators so equal inputs give equal bytes."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_json(path, obj) -> None:
    doc = dict(obj)
    doc.setdefault("schema_version", SCHEMA_VERSION)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_canonical(doc))
        fh.write("\n")


def read_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise DataFormatError(f"{path}: expected a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DataFormatError(f"{path}: unsupported schema_version {version!r}")
    return doc


def restrict_permissions(path) -> None:
    """Best-effort 0600 on files holding secret material."""
    try:
        os.chmod(path, 0o600)
    except OSError:
        pass
