"""Feature schema: raw CSV column names, prompt-facing display names, selection.

The canonical 23-feature schema is shipped as data; an auto-pruned schema can
be derived from training data instead (see features.prune_correlated).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

SCHEMA_FORMAT_VERSION = 1

# (raw CSV column name, prompt display name)
CANONICAL_FEATURES: tuple[tuple[str, str], ...] = (
    ("Header_Length", "Header Length"),
    ("Protocol Type", "Protocol Type"),
    ("Time_To_Live", "IP Time to Live"),
    ("psh_flag_number", "Packets with PSH Flag"),
    ("ack_flag_number", "Packets with ACK Flag"),
    ("ack_count", "Acknowledged Packets"),
    ("syn_count", "Packets with SYN Flag"),
    ("fin_count", "Packets with FIN Flag"),
    ("rst_count", "Packets with RST Flag"),
    ("HTTP", "HTTP Usage"),
    ("HTTPS", "HTTPS Usage"),
    ("DNS", "DNS Usage"),
    ("TCP", "TCP Usage"),
    ("UDP", "UDP Usage"),
    ("ICMP", "ICMP Usage"),
    ("Tot sum", "Total Packet Length"),
    ("Min", "Minimum Packet Size"),
    ("Max", "Maximum Packet Size"),
    ("AVG", "Average Packet Size"),
    ("Std", "Packet Size Deviation"),
    ("IAT", "Time Between Packets"),
    ("Number", "Total Packets"),
    ("Rate", "Flow Packet Transmission Rate"),
)

LABEL_COLUMN = "Label"


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature names with their prompt display names."""

    names: tuple[str, ...]
    display_names: tuple[str, ...]
    selected: tuple[bool, ...] = field(default=())

    def __post_init__(self):
        if len(self.names) != len(self.display_names):
            raise ValueError("names and display_names length mismatch")
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate feature names")
        if len(set(self.display_names)) != len(self.display_names):
            raise ValueError("duplicate display names")
        if not self.selected:
            object.__setattr__(self, "selected", (True,) * len(self.names))
        elif len(self.selected) != len(self.names):
            raise ValueError("selected mask length mismatch")

    def __len__(self) -> int:
        return len(self.names)

    @property
    def selected_names(self) -> tuple[str, ...]:
        return tuple(n for n, s in zip(self.names, self.selected) if s)

    def to_dict(self) -> dict:
        return {
            "format_version": SCHEMA_FORMAT_VERSION,
            "names": list(self.names),
            "display_names": list(self.display_names),
            "selected": list(self.selected),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        if d.get("format_version") != SCHEMA_FORMAT_VERSION:
            raise ValueError(f"unsupported schema format version: {d.get('format_version')}")
        return cls(tuple(d["names"]), tuple(d["display_names"]), tuple(d["selected"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "FeatureSchema":
        return cls.from_dict(json.loads(Path(path).read_text()))


def canonical_schema() -> FeatureSchema:
    """The 23-feature schema used throughout the pipeline."""
    names, display = zip(*CANONICAL_FEATURES)
    return FeatureSchema(names=names, display_names=display)
