"""Run manifests: a content-addressed inventory of every artifact in a run
directory.

The manifest records the configuration snapshot, the seeds that produced the
run, and a sha256 digest of every artifact file. It contains no timestamps or
host details, so two runs from identical inputs produce byte-identical
manifests — comparing `manifest_digest` values is a complete determinism
check.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from whatif import __version__
from whatif.errors import ConsistencyError

MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = "whatif-run"
MANIFEST_VERSION = 1


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def _artifact_paths(run_dir: Path) -> list[Path]:
    return sorted(
        p for p in run_dir.rglob("*")
        if p.is_file() and p.name != MANIFEST_NAME
    )


def build_manifest(run_dir: str | Path, config_doc: dict, seeds: dict) -> dict:
    """Inventory of `run_dir`: config + seeds + per-artifact sha256."""
    run_dir = Path(run_dir)
    artifacts = {
        p.relative_to(run_dir).as_posix(): file_sha256(p)
        for p in _artifact_paths(run_dir)
    }
    return {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "tool_version": __version__,
        "config": config_doc,
        "seeds": seeds,
        "artifacts": artifacts,
    }


def manifest_bytes(manifest: dict) -> bytes:
    return (json.dumps(manifest, sort_keys=True, indent=1) + "\n").encode()


def write_manifest(run_dir: str | Path, config_doc: dict, seeds: dict) -> Path:
    run_dir = Path(run_dir)
    manifest = build_manifest(run_dir, config_doc, seeds)
    path = run_dir / MANIFEST_NAME
    path.write_bytes(manifest_bytes(manifest))
    return path


def read_manifest(run_dir: str | Path) -> dict:
    path = Path(run_dir) / MANIFEST_NAME
    if not path.exists():
        raise ConsistencyError(f"no {MANIFEST_NAME} in {Path(run_dir)}")
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConsistencyError(f"malformed manifest at {path}: {exc}") from exc
    if manifest.get("format") != MANIFEST_FORMAT:
        raise ConsistencyError(f"{path} is not a run manifest")
    return manifest


def manifest_digest(run_dir: str | Path) -> str:
    """sha256 of the manifest file itself — a single fingerprint for the
    whole run."""
    return file_sha256(Path(run_dir) / MANIFEST_NAME)


def verify_manifest(run_dir: str | Path) -> dict:
    """Re-hash every artifact and compare against the manifest.

    Returns the manifest on success; raises ConsistencyError naming every
    missing, modified, or unlisted file otherwise.
    """
    run_dir = Path(run_dir)
    manifest = read_manifest(run_dir)
    recorded = manifest["artifacts"]
    actual = {
        p.relative_to(run_dir).as_posix(): p for p in _artifact_paths(run_dir)
    }
    problems = []
    for rel in sorted(recorded):
        if rel not in actual:
            problems.append(f"missing: {rel}")
        elif file_sha256(actual[rel]) != recorded[rel]:
            problems.append(f"modified: {rel}")
    for rel in sorted(set(actual) - set(recorded)):
        problems.append(f"unlisted: {rel}")
    if problems:
        raise ConsistencyError(
            f"run directory {run_dir} does not match its manifest: "
            + "; ".join(problems))
    return manifest
