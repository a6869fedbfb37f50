"""Run manifests: enough provenance to re-run any result exactly."""

from __future__ import annotations

import hashlib
import json
import time


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class ManifestWriter:
    """Collects inputs/outputs during a run and writes one JSON manifest."""

    def __init__(self, command: list[str]):
        self.command = list(command)
        self.started = time.time()
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []
        self.config: dict = {}
        self.seeds: dict = {}

    def add_input(self, path: str) -> None:
        self.inputs[path] = file_digest(path)

    def add_output(self, path: str) -> None:
        if path not in self.outputs:
            self.outputs.append(path)

    def write(self, path: str) -> None:
        doc = {
            "command": self.command,
            "config": self.config,
            "seeds": self.seeds,
            "input_digests": self.inputs,
            "outputs": self.outputs,
            "duration_seconds": time.time() - self.started,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
