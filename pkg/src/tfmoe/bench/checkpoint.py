"""Single-file, versioned, portable checkpoints.

Layout:

    bytes 0..7    magic ``TFMOECKP``
    bytes 8..11   little-endian uint32: manifest length in bytes
    manifest      UTF-8 JSON (format version, config, array table, norm
                  stats, cluster groups, RNG state, payload checksum)
    payload       concatenated raw little-endian float64 arrays, in the
                  order given by the manifest's array table

The array table carries name/group/shape/offset per parameter, so any
language can reconstruct the model; loading verifies the format version
and the payload's SHA-256 before touching anything.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from ..cluster import ClusterState, PretrainAutoencoder
from ..config import ExperimentConfig
from ..continual import TFMoEState, initialize_state
from ..data import NormStats
from ..errors import ChecksumError, CheckpointError, VersionError
from ..seeding import rng_for

MAGIC = b"TFMOECKP"
FORMAT_VERSION = 1


def save_checkpoint(state: TFMoEState, path) -> None:
    arrays = []
    chunks = []
    offset = 0
    for name, tensor in state.store.items():
        raw = np.ascontiguousarray(tensor.data, dtype="<f8").tobytes()
        arrays.append({
            "name": name,
            "group": state.store.group_of(name),
            "shape": list(tensor.data.shape),
            "offset": offset,
            "nbytes": len(raw),
        })
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)
    manifest = {
        "format_version": FORMAT_VERSION,
        "config": state.config.to_dict(),
        "config_hash": state.config.config_hash(),
        "steps_per_week": state.steps_per_week,
        "trained_tasks": state.trained_tasks,
        "arrays": arrays,
        "norm": None if state.norm is None else {"mean": state.norm.mean, "std": state.norm.std},
        "norm_history": {
            str(t): {"mean": n.mean, "std": n.std} for t, n in state.norm_history.items()
        },
        "cluster": None if state.cluster_state is None else {
            "hard_groups": state.cluster_state.hard_groups,
            "alpha": state.cluster_state.alpha,
        },
        "has_pretrain_model": state.pretrain_model is not None,
        "rng_state": state.train_rng.bit_generator.state,
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(len(blob).to_bytes(4, "little"))
        fh.write(blob)
        fh.write(payload)


def load_checkpoint(path) -> TFMoEState:
    data = Path(path).read_bytes()
    if data[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint (bad magic)")
    manifest_len = int.from_bytes(data[8:12], "little")
    try:
        manifest = json.loads(data[12 : 12 + manifest_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint manifest: {exc}") from exc
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionError(
            f"checkpoint format {version} is not supported by this reader "
            f"(expected {FORMAT_VERSION}) and no migration exists"
        )
    payload = data[12 + manifest_len :]
    if hashlib.sha256(payload).hexdigest() != manifest["payload_sha256"]:
        raise ChecksumError("checkpoint payload does not match its checksum")

    config = ExperimentConfig.from_dict(manifest["config"])
    state = initialize_state(config, manifest["steps_per_week"])
    if manifest["has_pretrain_model"]:
        state.pretrain_model = PretrainAutoencoder(
            state.store, width=manifest["steps_per_week"], d_z=config.d_z_pretrain,
            rng=rng_for(config.seed, "pretrain-ae"),
        )
    cluster = manifest.get("cluster")
    if cluster is not None:
        k = config.k
        state.store.add("pretrain/centroids",
                        np.zeros((k, config.d_z_pretrain)), "pretrain_reconstructor")

    values = {}
    for entry in manifest["arrays"]:
        start, nbytes = entry["offset"], entry["nbytes"]
        arr = np.frombuffer(payload[start : start + nbytes], dtype="<f8")
        values[entry["name"]] = arr.reshape(entry["shape"]).copy()
    expected = set(state.store.names())
    got = set(values)
    if got != expected:
        raise CheckpointError(
            f"checkpoint parameter set mismatch: unknown {sorted(got - expected)[:3]}, "
            f"missing {sorted(expected - got)[:3]}"
        )
    state.store.load_values(values)

    if cluster is not None:
        centroids = state.store["pretrain/centroids"].data.copy()
        k = centroids.shape[0]
        state.cluster_state = ClusterState(
            centroids=centroids,
            soft_assignments=np.zeros((0, k)),
            target=np.zeros((0, k)),
            hard_groups=[list(g) for g in cluster["hard_groups"]],
            alpha=cluster["alpha"],
        )
    if manifest["norm"] is not None:
        state.norm = NormStats(**manifest["norm"])
    state.norm_history = {
        int(t): NormStats(**d) for t, d in manifest.get("norm_history", {}).items()
    }
    state.trained_tasks = manifest["trained_tasks"]
    state.train_rng.bit_generator.state = manifest["rng_state"]
    return state
