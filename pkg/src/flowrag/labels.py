"""Class-label registry and raw-label standardization for CICIoT2023 flows.

Raw dataset labels mix CamelCase, hyphens, underscores and acronyms
("DDoS-SYN_Flood", "Mirai-udpplain"). Canonical names are lowercase,
space-separated, LLM-friendly words.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

SEEN_CLASSES: tuple[str, ...] = (
    "benign",
    "ddos ack fragmentation",
    "ddos icmp flood",
    "ddos icmp fragmentation",
    "ddos pshack flood",
    "ddos rst fin flood",
    "ddos synchronize flood",
    "ddos synonymousip flood",
    "ddos tcp flood",
    "ddos udp flood",
    "ddos udp fragmentation",
    "dns spoofing",
    "dos http flood",
    "dos synchronize flood",
    "dos tcp flood",
    "dos udp flood",
    "mirai greeth flood",
    "mirai greip flood",
    "mirai udp plain",
    "mitm arp spoofing",
    "recon host discovery",
    "recon os scan",
    "recon port scan",
    "vulnerability scan",
)

UNSEEN_CLASSES: tuple[str, ...] = (
    "backdoor malware",
    "browser hijacking",
    "command injection",
    "ddos http flood",
    "ddos slow loris",
    "dictionary brute force",
    "recon ping sweep",
    "sql injection",
    "cross site scripting",
    "uploading attack",
)

UNKNOWN_LABEL = "unknown"

# Token-level rewrites applied after lowercasing and separator replacement.
# Keys are single normalized tokens; values may expand to several words.
# No value contains a key, so expansion is idempotent.
TOKEN_EXPANSIONS: dict[str, str] = {
    "syn": "synchronize",
    "benigntraffic": "benign",
    "arpspoofing": "arp spoofing",
    "pingsweep": "ping sweep",
    "hostdiscovery": "host discovery",
    "osscan": "os scan",
    "portscan": "port scan",
    "vulnerabilityscan": "vulnerability scan",
    "browserhijacking": "browser hijacking",
    "commandinjection": "command injection",
    "dictionarybruteforce": "dictionary brute force",
    "sqlinjection": "sql injection",
    "xss": "cross site scripting",
    "slowloris": "slow loris",
    "rstfinflood": "rst fin flood",
    "udpplain": "udp plain",
}


@dataclass(frozen=True)
class LabelMap:
    """Registry of canonical class names plus the raw-label rewrite table."""

    seen_classes: tuple[str, ...] = SEEN_CLASSES
    unseen_classes: tuple[str, ...] = UNSEEN_CLASSES
    token_expansions: dict[str, str] = field(default_factory=lambda: dict(TOKEN_EXPANSIONS))

    def __post_init__(self):
        overlap = set(self.seen_classes) & set(self.unseen_classes)
        if overlap:
            raise ValueError(f"seen/unseen classes overlap: {sorted(overlap)}")
        for name in self.registry:
            if not re.fullmatch(r"[a-z]+( [a-z]+)*", name):
                raise ValueError(f"non-canonical class name: {name!r}")

    @property
    def registry(self) -> frozenset[str]:
        return frozenset(self.seen_classes) | frozenset(self.unseen_classes)


DEFAULT_LABEL_MAP = LabelMap()


def normalize_label(raw: str, label_map: LabelMap = DEFAULT_LABEL_MAP) -> str:
    """Lowercase, replace -/_ with spaces, collapse runs, expand known tokens."""
    if not raw or not raw.strip():
        raise ValueError("empty raw label")
    text = re.sub(r"[-_]+", " ", raw.strip().lower())
    tokens = []
    for tok in text.split():
        tokens.append(label_map.token_expansions.get(tok, tok))
    return " ".join(tokens)


def standardize_label(raw: str, label_map: LabelMap = DEFAULT_LABEL_MAP) -> str:
    """Map a raw dataset label to its canonical registry name.

    Labels that normalize to something outside the registry come back as
    ``"unknown"``; callers count those rather than treating them as errors.
    """
    name = normalize_label(raw, label_map)
    return name if name in label_map.registry else UNKNOWN_LABEL
