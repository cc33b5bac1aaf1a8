"""Content-addressed cache for provider responses, plus the cost ledger.

Cache layout: one JSON file per entry under a two-level hex fanout
(`cache/ab/cdef...json`), each carrying its payload digest so tampering
is detected on read. The ledger is append-only line-delimited JSON:
crash-safe appends, trivially auditable.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path

logger = logging.getLogger(__name__)

STATE_ENV_VAR = "CONTRIBSUM_STATE"
DEFAULT_STATE_DIR = ".contribsum"


def resolve_state_dir(configured: str | None = None) -> Path:
    """State directory: CONTRIBSUM_STATE env beats config beats default."""
    env = os.environ.get(STATE_ENV_VAR)
    return Path(env or configured or DEFAULT_STATE_DIR)


def cache_key(commit_scope: str, template_hash: str, model_id: str, payload: str) -> str:
    """Collision-resistant digest over everything that shapes a response."""
    material = "\x1f".join(
        [commit_scope, template_hash, model_id, hashlib.sha256(payload.encode()).hexdigest()]
    )
    return hashlib.sha256(material.encode()).hexdigest()


class Store:
    """Durable key → JSON payload cache with digest verification."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def _path(self, key: str) -> Path:
        return self.directory / key[:2] / f"{key[2:]}.json"

    def get(self, key: str) -> dict | None:
        """Cached payload, or None when absent or corrupt (corrupt warns)."""
        path = self._path(key)
        try:
            wrapped = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None
        except (OSError, json.JSONDecodeError):
            logger.warning("corrupt cache entry dropped: %s", path)
            return None
        payload_text = wrapped.get("payload_json", "")
        digest = hashlib.sha256(payload_text.encode()).hexdigest()
        if digest != wrapped.get("digest"):
            logger.warning("cache digest mismatch, entry dropped: %s", path)
            return None
        return json.loads(payload_text)

    def put(self, key: str, payload: dict) -> None:
        """Idempotent store; equal payloads overwrite with identical bytes."""
        payload_text = json.dumps(payload, sort_keys=True)
        wrapped = {
            "digest": hashlib.sha256(payload_text.encode()).hexdigest(),
            "payload_json": payload_text,
        }
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        # unique temp name: concurrent writers of the same key must not clash
        tmp = path.with_suffix(f".{os.getpid()}.{threading.get_ident()}.tmp")
        tmp.write_text(json.dumps(wrapped, sort_keys=True), encoding="utf-8")
        tmp.replace(path)


@dataclass(frozen=True)
class LedgerEntry:
    timestamp: float
    tier: str
    model_id: str
    input_tokens: int
    output_tokens: int
    cost: float


class CostLedger:
    """Append-only usage ledger with running totals per tier.

    When constructed with a path, every append is persisted immediately;
    without one the ledger is memory-only (handy in tests).
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self.entries: list[LedgerEntry] = []
        if self.path and self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                raw = json.loads(line)
                self.entries.append(LedgerEntry(**raw))

    def add(
        self,
        tier: str,
        model_id: str,
        input_tokens: int,
        output_tokens: int,
        cost: float,
        timestamp: float | None = None,
    ) -> LedgerEntry:
        if input_tokens < 0 or output_tokens < 0:
            raise ValueError("token counts must be non-negative")
        entry = LedgerEntry(
            timestamp=time.time() if timestamp is None else timestamp,
            tier=tier,
            model_id=model_id,
            input_tokens=input_tokens,
            output_tokens=output_tokens,
            cost=cost,
        )
        self.entries.append(entry)
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry.__dict__, sort_keys=True) + "\n")
        return entry

    def totals_by_tier(self) -> dict[str, float]:
        totals: dict[str, float] = {}
        for entry in self.entries:
            totals[entry.tier] = totals.get(entry.tier, 0.0) + entry.cost
        return totals

    @property
    def total(self) -> float:
        return sum(e.cost for e in self.entries)


def ledger_report(ledger: CostLedger) -> str:
    """Human-readable per-tier and grand-total cost summary."""
    lines = ["Cost ledger"]
    totals = ledger.totals_by_tier()
    tokens_in = sum(e.input_tokens for e in ledger.entries)
    tokens_out = sum(e.output_tokens for e in ledger.entries)
    for tier in sorted(totals):
        count = sum(1 for e in ledger.entries if e.tier == tier)
        lines.append(f"  {tier}: {count} calls, ${totals[tier]:.2f}")
    if not totals:
        lines.append("  (no entries)")
    lines.append(f"  tokens: {tokens_in} in / {tokens_out} out")
    lines.append(f"  total: ${ledger.total:.2f}")
    return "\n".join(lines)
