"""Common JSON container for every serialized model (RNN, convex net, MA, HMM)."""

from __future__ import annotations

import json

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Raised on corrupt files, version mismatches or shape mismatches."""


def save_container(path, kind: str, payload: dict) -> None:
    doc = {"format_version": FORMAT_VERSION, "kind": kind}
    doc.update(payload)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_container(path, expect_kind: str | None = None) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"corrupt model file {path}: {exc}") from exc
    if not isinstance(doc, dict) or "format_version" not in doc or "kind" not in doc:
        raise ModelFormatError(f"not a model container: {path}")
    if doc["format_version"] != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported format version {doc['format_version']} (expected {FORMAT_VERSION})"
        )
    if expect_kind is not None and doc["kind"] != expect_kind:
        raise ModelFormatError(f"expected a {expect_kind!r} model, got {doc['kind']!r}")
    return doc
