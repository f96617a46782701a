"""Run manifests: a digest of the resolved configuration plus output paths.

Every JSON/CSV/plot file a command produces carries the digest of the
configuration that produced it, so results can be traced back to their
exact inputs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__


def config_digest(config: dict) -> str:
    """sha256 of the canonical JSON encoding of a resolved configuration."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class RunManifest:
    command: str
    config_digest: str
    seeds: list[int]
    outputs: list[str] = field(default_factory=list)
    tool_version: str = __version__

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config_digest": self.config_digest,
            "seeds": self.seeds,
            "outputs": self.outputs,
            "tool_version": self.tool_version,
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
