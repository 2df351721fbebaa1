"""Output manifest: which command wrote which files, with what config and seeds."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

MANIFEST = "manifest.json"

# wall-clock measurements; listed in the manifest but never checksummed
VOLATILE_SUFFIXES = ("timing.csv", "wall_times.csv")


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def is_volatile(path) -> bool:
    return str(path).endswith(VOLATILE_SUFFIXES)


def record(out_dir, command: str, config_file, seed: int, seeds, files) -> dict:
    """Add or replace the entry for ``command`` in ``out_dir/manifest.json``."""
    out = Path(out_dir).resolve()
    path = out / MANIFEST
    data = json.loads(path.read_text()) if path.is_file() else {"commands": {}}
    entry = {"config": str(Path(config_file).resolve().relative_to(out)), "seed": int(seed),
             "seeds": [int(s) for s in seeds], "files": {}, "volatile": []}
    for f in sorted({Path(f).resolve() for f in files}):
        rel = str(f.relative_to(out))
        if is_volatile(f):
            entry["volatile"].append(rel)
        else:
            entry["files"][rel] = sha256(f)
    data["commands"][command] = entry
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return entry


def verify(out_dir) -> list[str]:
    """Relative paths whose current checksum differs from the manifest (missing files included)."""
    out = Path(out_dir)
    data = json.loads((out / MANIFEST).read_text())
    bad = []
    for entry in data["commands"].values():
        for rel, digest in entry["files"].items():
            f = out / rel
            if not f.is_file() or sha256(f) != digest:
                bad.append(rel)
    return bad
