"""JSONL epoch serialization and dataset manifest handling.

One epoch per line.  Truth fields are written only when present, so the
same schema serves labelled training data and inference-only exports.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

from .errors import IoFailure
from .types import (
    Band,
    Constellation,
    EcefPosition,
    Epoch,
    Observation,
    SatelliteState,
    SolutionState,
)

DATASET_FORMAT = "gnssfix.dataset/1"
MANIFEST_NAME = "manifest.json"


def epoch_to_record(epoch: Epoch, include_truth: bool = True) -> dict:
    """Plain-dict form of one epoch, keys in the on-disk order."""
    rec: dict = {"epoch_id": epoch.epoch_id, "region": epoch.region_id}
    if include_truth and epoch.truth is not None:
        t = epoch.truth
        rec["truth"] = {"x": t.pos.x, "y": t.pos.y, "z": t.pos.z, "clk": t.clock_bias}
    g = epoch.initial_guess
    rec["guess"] = {"x": g.x, "y": g.y, "z": g.z}
    obs_out = []
    for o in epoch.observations:
        d = {
            "sat_id": o.sat.sat_id,
            "const": o.sat.constellation.value,
            "band": o.sat.band.value,
            "sat_pos": [o.sat.pos.x, o.sat.pos.y, o.sat.pos.z],
            "pr": o.pseudorange,
            "cn0": o.cn0,
            "avg_pow": o.avg_power,
        }
        if include_truth and o.truth_error is not None:
            d["truth_err"] = o.truth_error
        obs_out.append(d)
    rec["obs"] = obs_out
    return rec


def record_to_epoch(rec: dict) -> Epoch:
    """Inverse of epoch_to_record; raises IoFailure on malformed records."""
    try:
        truth = None
        if "truth" in rec:
            t = rec["truth"]
            truth = SolutionState(
                pos=EcefPosition(float(t["x"]), float(t["y"]), float(t["z"])),
                clock_bias=float(t["clk"]),
            )
        g = rec["guess"]
        observations = []
        for d in rec["obs"]:
            sat = SatelliteState(
                sat_id=int(d["sat_id"]),
                constellation=Constellation(d["const"]),
                band=Band(d["band"]),
                pos=EcefPosition(*(float(v) for v in d["sat_pos"])),
            )
            observations.append(
                Observation(
                    sat=sat,
                    pseudorange=float(d["pr"]),
                    cn0=float(d["cn0"]),
                    avg_power=float(d["avg_pow"]),
                    truth_error=float(d["truth_err"]) if "truth_err" in d else None,
                )
            )
        return Epoch(
            epoch_id=int(rec["epoch_id"]),
            region_id=str(rec["region"]),
            observations=tuple(observations),
            initial_guess=EcefPosition(float(g["x"]), float(g["y"]), float(g["z"])),
            truth=truth,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise IoFailure(f"malformed epoch record: {exc}") from exc


def write_shard(path: str, epochs: list[Epoch], include_truth: bool = True) -> None:
    """Write epochs as one JSONL shard, one line per epoch."""
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for ep in epochs:
                fh.write(json.dumps(epoch_to_record(ep, include_truth), separators=(",", ":")))
                fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write shard {path}: {exc}") from exc


def read_shard(path: str) -> list[Epoch]:
    """Read one JSONL shard back into epochs."""
    epochs = []
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise IoFailure(f"{path}:{lineno}: invalid JSON: {exc}") from exc
                epochs.append(record_to_epoch(rec))
    except OSError as exc:
        raise IoFailure(f"cannot read shard {path}: {exc}") from exc
    return epochs


@dataclass(frozen=True)
class ManifestEntry:
    region_id: str
    epochs: int
    scene: dict


@dataclass(frozen=True)
class DatasetManifest:
    """What a generated dataset contains and how to regenerate it."""

    entries: tuple[ManifestEntry, ...]
    global_seed: int
    format_version: str = DATASET_FORMAT

    def __post_init__(self) -> None:
        ids = [e.region_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate region ids in manifest: {ids}")

    @property
    def region_ids(self) -> tuple[str, ...]:
        return tuple(e.region_id for e in self.entries)


def write_manifest(manifest: DatasetManifest, data_dir: str) -> str:
    payload = {
        "format": manifest.format_version,
        "global_seed": manifest.global_seed,
        "regions": [
            {"region_id": e.region_id, "epochs": e.epochs, "scene": e.scene} for e in manifest.entries
        ],
    }
    path = os.path.join(data_dir, MANIFEST_NAME)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write manifest {path}: {exc}") from exc
    return path


def read_manifest(data_dir: str) -> DatasetManifest:
    path = os.path.join(data_dir, MANIFEST_NAME)
    if not os.path.exists(path):
        raise IoFailure(f"no {MANIFEST_NAME} in {data_dir}")
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        entries = tuple(
            ManifestEntry(region_id=str(r["region_id"]), epochs=int(r["epochs"]), scene=dict(r["scene"]))
            for r in payload["regions"]
        )
        return DatasetManifest(
            entries=entries,
            global_seed=int(payload["global_seed"]),
            format_version=str(payload["format"]),
        )
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise IoFailure(f"cannot read manifest {path}: {exc}") from exc


def shard_path(data_dir: str, region_id: str) -> str:
    return os.path.join(data_dir, f"{region_id}.jsonl")


def load_region(data_dir: str, region_id: str) -> list[Epoch]:
    return read_shard(shard_path(data_dir, region_id))


def load_dataset(data_dir: str) -> tuple[DatasetManifest, dict[str, list[Epoch]]]:
    """Read the manifest plus every region shard it lists."""
    manifest = read_manifest(data_dir)
    regions = {rid: load_region(data_dir, rid) for rid in manifest.region_ids}
    return manifest, regions
