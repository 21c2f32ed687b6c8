"""Run manifests and deterministic output writers."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import platform
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy

from . import __version__


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def csv_text(header, rows) -> str:
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    identifiers: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    versions: dict = field(default_factory=dict)
    started: str = ""
    wall_clock: float = 0.0
    stages: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    status: str = "ok"

    @staticmethod
    def current_versions() -> dict:
        return {"scottlab": __version__, "python": platform.python_version(),
                "numpy": np.__version__, "scipy": scipy.__version__}

    def to_json(self) -> str:
        return dumps(asdict(self))

    @classmethod
    def load(cls, path) -> "RunManifest":
        with open(path) as fh:
            data = json.load(fh)
        return cls(**data)

    def verify(self, directory) -> dict:
        """Map of output name -> True if the file exists with the recorded digest."""
        out = {}
        for name, digest in self.outputs.items():
            p = os.path.join(directory, name)
            out[name] = os.path.exists(p) and sha256(p) == digest
        return out


class Stopwatch:
    def __init__(self):
        self.stages = {}
        self.t0 = time.perf_counter()
        self.started = time.strftime("%Y-%m-%dT%H:%M:%S%z")

    def stage(self, name):
        sw = self

        class _Ctx:
            def __enter__(self):
                self.t = time.perf_counter()

            def __exit__(self, *exc):
                sw.stages[name] = sw.stages.get(name, 0.0) + time.perf_counter() - self.t
                return False

        return _Ctx()

    @property
    def elapsed(self):
        return time.perf_counter() - self.t0


def write_outputs(directory, files: dict, manifest: RunManifest) -> None:
    """Write every output (name -> text), then the manifest with their digests."""
    os.makedirs(directory, exist_ok=True)
    for name in sorted(files):
        path = os.path.join(directory, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(files[name])
        manifest.outputs[name] = sha256(path)
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
        fh.write(manifest.to_json())
