"""Pipeline manifest: stage configs and content hashes of stage artifacts.

Stages append themselves to one JSON manifest. Before a stage consumes a
file that an earlier stage recorded as its output, the hash is re-checked
so stale or hand-edited intermediates fail loudly instead of propagating.
Writes are atomic (temp file + rename).
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

from . import __version__
from .errors import ManifestError


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def load_manifest(path) -> dict:
    if not os.path.exists(path):
        return {"tool_version": __version__, "stages": []}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def save_manifest(path, manifest: dict):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".manifest-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def recorded_outputs(manifest: dict) -> dict[str, str]:
    out: dict[str, str] = {}
    for stage in manifest.get("stages", []):
        out.update(stage.get("outputs", {}))
    return out


def verify_inputs(manifest: dict, input_paths) -> None:
    """Check consumed files against the hashes recorded when they were written."""
    known = recorded_outputs(manifest)
    for path in input_paths:
        key = os.path.abspath(str(path))
        if key in known:
            actual = sha256_file(path)
            if actual != known[key]:
                raise ManifestError(
                    f"{path}: content hash {actual[:12]} does not match the "
                    f"recorded {known[key][:12]}")


def record_stage(manifest: dict, stage: str, config: dict,
                 inputs, outputs) -> None:
    manifest["tool_version"] = __version__
    manifest.setdefault("stages", []).append({
        "stage": stage,
        "config": config,
        "inputs": {os.path.abspath(str(p)): sha256_file(p) for p in inputs},
        "outputs": {os.path.abspath(str(p)): sha256_file(p) for p in outputs},
    })
