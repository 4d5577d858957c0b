"""Versioned, hash-checked dataset bundles.

Layout of a bundle directory::

    manifest.json      generation metadata, per-instance provenance, file hashes
    observations.csv   instance_id,t,channel,value   sorted by (instance_id, t, channel)
    ground_truth.csv   instance_id,step,channel,value

Floats are written with Python's shortest round-trip ``repr``, so reading
a bundle restores every value bit for bit.  The manifest is JSON with
sorted keys; its SHA-256 is the bundle hash.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .generator import Dataset, ImtsInstance, regenerate
from .rng import ALGORITHM

__all__ = [
    "FORMAT_VERSION",
    "MANIFEST",
    "OBSERVATIONS",
    "GROUND_TRUTH",
    "BundleError",
    "BundleExists",
    "MissingFile",
    "VersionMismatch",
    "HashMismatch",
    "ConsistencyError",
    "ProvenanceError",
    "render_bundle",
    "write_bundle",
    "read_bundle",
    "read_manifest",
    "verify_bundle",
]

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
OBSERVATIONS = "observations.csv"
GROUND_TRUTH = "ground_truth.csv"
OBS_HEADER = "instance_id,t,channel,value\n"
TRUTH_HEADER = "instance_id,step,channel,value\n"


class BundleError(ValueError):
    pass


class BundleExists(BundleError):
    pass


class MissingFile(BundleError):
    pass


class VersionMismatch(BundleError):
    pass


class HashMismatch(BundleError):
    pass


class ConsistencyError(BundleError):
    pass


class ProvenanceError(BundleError):
    pass


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _observations_csv(instances: list[ImtsInstance]) -> bytes:
    parts = [OBS_HEADER]
    for inst in instances:
        iid = inst.instance_id
        parts.extend(f"{iid},{t!r},{c},{v!r}\n" for t, c, v in inst.observations)
    return "".join(parts).encode()


def _ground_truth_csv(instances: list[ImtsInstance]) -> bytes:
    parts = [TRUTH_HEADER]
    for inst in instances:
        iid = inst.instance_id
        for step, row in enumerate(inst.ground_truth.tolist()):
            parts.extend(f"{iid},{step},{c},{v!r}\n" for c, v in enumerate(row))
    return "".join(parts).encode()


def render_bundle(dataset: Dataset) -> dict[str, bytes]:
    """File name to exact file contents."""
    obs = _observations_csv(dataset.instances)
    truth = _ground_truth_csv(dataset.instances)
    manifest = dict(dataset.metadata)
    manifest["format_version"] = FORMAT_VERSION
    manifest["instances"] = [
        {**inst.provenance(), "dt": inst.dt} for inst in dataset.instances
    ]
    manifest["files"] = {OBSERVATIONS: _sha256(obs), GROUND_TRUTH: _sha256(truth)}
    text = json.dumps(manifest, sort_keys=True, indent=1, ensure_ascii=True, allow_nan=False)
    return {MANIFEST: (text + "\n").encode(), OBSERVATIONS: obs, GROUND_TRUTH: truth}


def write_bundle(dataset: Dataset, directory: str | os.PathLike, force: bool = False) -> str:
    """Write the bundle and return its manifest hash.

    Raises:
        BundleExists: the directory already holds bundle files and
            ``force`` is false.
    """
    directory = Path(directory)
    files = render_bundle(dataset)
    if not force and any((directory / name).exists() for name in files):
        raise BundleExists(f"{directory} already contains a bundle (use force to overwrite)")
    directory.mkdir(parents=True, exist_ok=True)
    # data files first so a manifest never points at missing data
    for name in (OBSERVATIONS, GROUND_TRUTH, MANIFEST):
        (directory / name).write_bytes(files[name])
    return _sha256(files[MANIFEST])


def read_manifest(directory: str | os.PathLike) -> tuple[dict, str]:
    path = Path(directory) / MANIFEST
    if not path.is_file():
        raise MissingFile(f"missing {path}")
    raw = path.read_bytes()
    try:
        manifest = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise BundleError(f"unreadable manifest: {exc}") from None
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(
            f"bundle format version {version!r} is not supported (expected {FORMAT_VERSION})"
        )
    return manifest, _sha256(raw)


def _rows(data: bytes, header: str, name: str):
    text = data.decode()
    if not text.startswith(header):
        raise ConsistencyError(f"{name}: unexpected header")
    for lineno, line in enumerate(text[len(header) :].splitlines(), start=2):
        parts = line.split(",")
        if len(parts) != 4:
            raise ConsistencyError(f"{name}:{lineno}: expected 4 fields")
        yield lineno, parts


def read_bundle(directory: str | os.PathLike) -> Dataset:
    """Load and check a bundle: version, files present, hashes, then shapes."""
    directory = Path(directory)
    manifest, _ = read_manifest(directory)
    data = {}
    for name in (OBSERVATIONS, GROUND_TRUTH):
        path = directory / name
        if not path.is_file():
            raise MissingFile(f"missing {path}")
        data[name] = path.read_bytes()
    for name, digest in manifest["files"].items():
        if _sha256(data[name]) != digest:
            raise HashMismatch(f"{name} does not match the hash recorded in the manifest")

    prov = manifest["instances"]
    C = int(manifest["channels"])
    W = int(manifest["dataset_config"]["window_steps"])
    if len(prov) != manifest["instance_count"]:
        raise ConsistencyError("instance list does not match instance_count")
    index = {p["id"]: k for k, p in enumerate(prov)}
    truth = np.full((len(prov), W, C), np.nan)
    for lineno, (iid, step, c, v) in _rows(data[GROUND_TRUTH], TRUTH_HEADER, GROUND_TRUTH):
        try:
            truth[index[int(iid)], int(step), int(c)] = float(v)
        except (KeyError, IndexError, ValueError):
            raise ConsistencyError(f"{GROUND_TRUTH}:{lineno}: bad row") from None
    if np.isnan(truth).any():
        raise ConsistencyError(f"{GROUND_TRUTH} does not cover every window cell")

    obs: list[list[tuple[int, int, float]]] = [[] for _ in prov]
    for lineno, (iid, t, c, v) in _rows(data[OBSERVATIONS], OBS_HEADER, OBSERVATIONS):
        try:
            k = index[int(iid)]
            t, dt = float(t), prov[k]["dt"]
            step = round(t / dt)
            if step * dt != t or not 0 <= step < W or not 0 <= int(c) < C:
                raise ValueError
            obs[k].append((step, int(c), float(v)))
        except (KeyError, ValueError):
            raise ConsistencyError(f"{OBSERVATIONS}:{lineno}: bad row") from None
    total = sum(len(o) for o in obs)
    if total != manifest["observation_count"]:
        raise ConsistencyError(
            f"{OBSERVATIONS} holds {total} rows, manifest says {manifest['observation_count']}"
        )

    instances = []
    for k, p in enumerate(prov):
        rows = obs[k]
        if rows != sorted(rows) or len({r[:2] for r in rows}) != len(rows):
            raise ConsistencyError(f"instance {p['id']}: observations unsorted or duplicated")
        arr = np.array(rows, dtype=np.float64).reshape(-1, 3)
        instances.append(
            ImtsInstance(
                instance_id=p["id"],
                onset_index=p["onset_index"],
                duration=p["duration"],
                dt=p["dt"],
                x0=tuple(p["x0"]),
                constants=tuple(p["constants"]),
                ground_truth=truth[k],
                obs_step=arr[:, 0].astype(np.int64),
                obs_channel=arr[:, 1].astype(np.int64),
                obs_value=np.array([r[2] for r in rows], dtype=np.float64),
                attempt=p["attempt"],
            )
        )
    metadata = {k: v for k, v in manifest.items() if k not in ("instances", "files")}
    return Dataset(instances, metadata)


def verify_bundle(directory: str | os.PathLike, jobs: int = 1) -> tuple[bool, str, str]:
    """Regenerate a bundle from its manifest and compare manifest hashes.

    Returns ``(match, recorded_hash, regenerated_hash)``.

    Raises:
        ProvenanceError: the bundle was drawn with a different RNG algorithm.
    """
    manifest, recorded = read_manifest(directory)
    if manifest.get("rng_algorithm") != ALGORITHM:
        raise ProvenanceError(
            f"bundle uses RNG {manifest.get('rng_algorithm')!r}; "
            f"this build can only regenerate {ALGORITHM!r}"
        )
    metadata = {k: v for k, v in manifest.items() if k not in ("instances", "files")}
    files = render_bundle(regenerate(metadata, jobs))
    fresh = _sha256(files[MANIFEST])
    return fresh == recorded, recorded, fresh
