"""Cross-service correlation: composite fingerprints, the newline-delimited
JSON wire frame, aggregate-count broadcast, and the scripted campaign
simulator.

Boundary property: nothing serialized by this module (frames, replies,
reports) ever contains raw or redacted prompt text — fingerprint bits and
caller-supplied non-private metadata only. Replies carry aggregate match
counts; per-match ids stay inside the owning service.
"""

from __future__ import annotations

import base64
import binascii
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .embeddings import PseudoEmbedder
from .errors import DimensionMismatch, FrameDecodeError, SchemaError
from .fingerprint import (PrivacyBudget, packed_length, quantize, randomize)
from .redaction import Redactor
from .store import FingerprintStore, StoredFingerprint
from .textproc import derive_seed

FRAME_VERSION = 1
_FRAME_KEYS = ("version", "origin_service", "fingerprint_id", "dim", "alpha",
               "bits_base64", "metadata", "issued_at")


def _check_padding_bits(data: bytes, dim: int) -> bool:
    rem = dim % 8
    return not (rem and data[-1] & ~((1 << rem) - 1) & 0xFF)


@dataclass(frozen=True)
class CompositeFingerprint:
    """Privatized bits plus non-private metadata; the wire object."""

    version: int
    origin_service: str
    fingerprint_id: str
    dim: int
    alpha: float
    bits_base64: str
    metadata: dict[str, str]
    issued_at: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        decoded = self.decoded_bits()
        if len(decoded) != packed_length(self.dim):
            raise ValueError(
                f"decoded payload is {len(decoded)} bytes, expected "
                f"{packed_length(self.dim)} for dim {self.dim}")
        if not _check_padding_bits(decoded, self.dim):
            raise ValueError("nonzero padding bits in composite payload")
        for key, value in self.metadata.items():
            if not isinstance(key, str) or not isinstance(value, str):
                raise ValueError("metadata must map strings to strings")
            if "\n" in value:
                raise ValueError(f"metadata value for {key!r} contains a newline")

    def decoded_bits(self) -> bytes:
        return base64.b64decode(self.bits_base64, validate=True)


def encode_frame(f: CompositeFingerprint) -> bytes:
    """Single-line JSON frame, newline terminated; metadata keys sorted so
    identical composites encode to identical bytes."""
    obj = {
        "version": f.version,
        "origin_service": f.origin_service,
        "fingerprint_id": f.fingerprint_id,
        "dim": f.dim,
        "alpha": f.alpha,
        "bits_base64": f.bits_base64,
        "metadata": {k: f.metadata[k] for k in sorted(f.metadata)},
        "issued_at": f.issued_at,
    }
    return (json.dumps(obj, separators=(",", ":")) + "\n").encode("utf-8")


def decode_frame(data: bytes | str, strict: bool = True) -> CompositeFingerprint:
    """Parse and validate one frame; every failure names the bad field."""
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise FrameDecodeError("<frame>", f"not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise FrameDecodeError("<frame>", "frame is not a JSON object")
    for key in _FRAME_KEYS:
        if key not in obj:
            raise FrameDecodeError(key, "missing required key")
    unknown = set(obj) - set(_FRAME_KEYS)
    if unknown:
        if strict:
            raise FrameDecodeError(sorted(unknown)[0], "unknown key in strict mode")
        warnings.warn(f"ignoring unknown frame keys: {sorted(unknown)}")
    if not isinstance(obj["version"], int):
        raise FrameDecodeError("version", "must be an integer")
    for key in ("origin_service", "fingerprint_id", "bits_base64"):
        if not isinstance(obj[key], str):
            raise FrameDecodeError(key, "must be a string")
    if not isinstance(obj["dim"], int) or obj["dim"] < 1:
        raise FrameDecodeError("dim", "must be a positive integer")
    if not isinstance(obj["alpha"], (int, float)) or not obj["alpha"] > 0:
        raise FrameDecodeError("alpha", "must be a positive number")
    if not isinstance(obj["issued_at"], int):
        raise FrameDecodeError("issued_at", "must be an integer")
    if not isinstance(obj["metadata"], dict):
        raise FrameDecodeError("metadata", "must be an object")
    try:
        decoded = base64.b64decode(obj["bits_base64"], validate=True)
    except (binascii.Error, ValueError) as exc:
        raise FrameDecodeError("bits_base64", f"invalid base64: {exc}") from None
    if len(decoded) != packed_length(obj["dim"]):
        raise FrameDecodeError(
            "bits_base64", f"decoded length {len(decoded)} != "
            f"{packed_length(obj['dim'])} required for dim {obj['dim']}")
    if not _check_padding_bits(decoded, obj["dim"]):
        raise FrameDecodeError("bits_base64", "nonzero padding bits")
    try:
        return CompositeFingerprint(
            version=obj["version"], origin_service=obj["origin_service"],
            fingerprint_id=obj["fingerprint_id"], dim=obj["dim"],
            alpha=float(obj["alpha"]), bits_base64=obj["bits_base64"],
            metadata=dict(obj["metadata"]), issued_at=obj["issued_at"])
    except ValueError as exc:
        raise FrameDecodeError("metadata", str(exc)) from None


@dataclass(frozen=True)
class CorrelationReply:
    """Aggregate-only answer from one peer: a count, never match contents."""

    service_id: str
    fingerprint_id: str
    match_count: int
    tau_used: int
    error: str | None = None

    def to_dict(self) -> dict:
        out = {"service_id": self.service_id, "fingerprint_id": self.fingerprint_id,
               "match_count": self.match_count, "tau_used": self.tau_used}
        if self.error is not None:
            out["error"] = self.error
        return out


@dataclass
class ServiceNode:
    """One compliance boundary: a service id, its private log, and its
    local matching threshold."""

    service_id: str
    store: FingerprintStore
    tau: int
    policy: str = "log"

    def __post_init__(self):
        if self.store.dim is not None and not (0 <= self.tau <= self.store.dim):
            raise ValueError(
                f"tau {self.tau} outside [0, {self.store.dim}] for {self.service_id}")


@dataclass
class PipelineConfig:
    """Everything a node needs to turn a raw prompt into a composite."""

    redactor: Redactor
    provider: object
    alpha: float
    base_seed: int
    dim: int = 768


def ingest_detection(node: ServiceNode, raw_prompt: str,
                     metadata: Mapping[str, str], config: PipelineConfig,
                     fingerprint_id: str | None = None,
                     issued_at: int = 0) -> CompositeFingerprint:
    """Run redact -> embed -> quantize -> randomize inside the node's
    boundary, log the privatized fingerprint locally, and return the
    composite for broadcast.

    Nothing is stored if any stage fails, and neither the raw nor the
    redacted text ever reaches a serialized artifact.
    """
    if fingerprint_id is None:
        fingerprint_id = f"{node.service_id}-fp{len(node.store)}"
    redacted = config.redactor.redact(raw_prompt)
    embedding = config.provider.embed(redacted)
    base = quantize(embedding)
    seed = derive_seed(config.base_seed, node.service_id, fingerprint_id)
    privatized = randomize(base, PrivacyBudget.of(config.alpha), seed)
    composite = CompositeFingerprint(
        version=FRAME_VERSION, origin_service=node.service_id,
        fingerprint_id=fingerprint_id, dim=privatized.dim,
        alpha=float(PrivacyBudget.of(config.alpha).alpha),
        bits_base64=base64.b64encode(privatized.bits).decode("ascii"),
        metadata=dict(metadata), issued_at=issued_at)
    node.store.insert(StoredFingerprint(
        id=fingerprint_id, bits=privatized.bits, dim=privatized.dim,
        alpha=composite.alpha, metadata=dict(metadata)))
    return composite


def broadcast(f: CompositeFingerprint,
              peers: Sequence[ServiceNode]) -> list[CorrelationReply]:
    """Search every peer's own store for the composite and collect
    aggregate match counts, in deterministic peer-id order.

    A dimension mismatch at one peer yields an error-marker reply for that
    peer; the others are unaffected. Peers' stores are never modified.
    """
    if not peers:
        raise ValueError("broadcast requires at least one peer")
    bits = f.decoded_bits()
    replies: list[CorrelationReply] = []
    for peer in sorted(peers, key=lambda p: p.service_id):
        if peer.store.dim is not None and peer.store.dim != f.dim:
            replies.append(CorrelationReply(
                service_id=peer.service_id, fingerprint_id=f.fingerprint_id,
                match_count=0, tau_used=peer.tau,
                error=f"dimension mismatch: {f.dim} vs {peer.store.dim}"))
            continue
        matches = peer.store.search_threshold(bits, peer.tau)
        replies.append(CorrelationReply(
            service_id=peer.service_id, fingerprint_id=f.fingerprint_id,
            match_count=len(matches), tau_used=peer.tau))
    return replies


# -- scripted campaign simulation ----------------------------------------------

@dataclass
class EventOutcome:
    index: int
    service_id: str
    fingerprint_id: str
    record_id: str
    attack_group: str | None
    replies: list[CorrelationReply]

    def to_dict(self) -> dict:
        return {"index": self.index, "service_id": self.service_id,
                "fingerprint_id": self.fingerprint_id, "record_id": self.record_id,
                "attack_group": self.attack_group,
                "replies": [r.to_dict() for r in self.replies]}


@dataclass
class CampaignReport:
    dim: int
    alpha: float
    seed: int
    events: list[EventOutcome] = field(default_factory=list)
    service_totals: dict[str, dict] = field(default_factory=dict)
    linkage: dict[str, list[str]] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({
            "dim": self.dim, "alpha": self.alpha, "seed": self.seed,
            "events": [e.to_dict() for e in self.events],
            "service_totals": {k: self.service_totals[k]
                               for k in sorted(self.service_totals)},
            "linkage": {k: self.linkage[k] for k in sorted(self.linkage)},
        }, separators=(",", ":")) + "\n"

    def to_table(self) -> str:
        lines = [f"campaign: dim={self.dim} alpha={self.alpha} seed={self.seed}"]
        for e in self.events:
            lines.append(f"event {e.index}: {e.service_id} broadcast "
                         f"{e.fingerprint_id} (group={e.attack_group or '-'})")
            for r in e.replies:
                status = r.error if r.error else f"{r.match_count} match(es)"
                lines.append(f"    {r.service_id} @ tau={r.tau_used}: {status}")
        lines.append("linkage:")
        for group in sorted(self.linkage):
            lines.append(f"    {group}: {', '.join(self.linkage[group])}")
        return "\n".join(lines) + "\n"


def _load_scenario(scenario: dict | str | Path) -> tuple[dict, Path | None]:
    if isinstance(scenario, (str, Path)):
        path = Path(scenario)
        try:
            obj = json.loads(path.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"scenario is not valid JSON: {exc.msg}",
                              path=str(path), line=exc.lineno) from None
        return obj, path
    return dict(scenario), None


def simulate_campaign(scenario: dict | str | Path,
                      redactor: Redactor | None = None) -> CampaignReport:
    """Replay a scripted multi-service scenario fully in-process.

    Each service first fingerprints its own corpus into its private log
    (the historical record), then scripted detection events run in order:
    the named service ingests the named record's prompt and broadcasts the
    composite to every other service. Fully deterministic for a fixed
    scenario: the logical clock is the event index and all noise seeds
    derive from (seed, service, record).
    """
    from .evaluation import load_corpus

    obj, base_path = _load_scenario(scenario)
    where = str(base_path) if base_path else "<scenario>"
    for key in ("dim", "alpha", "seed", "services", "events"):
        if key not in obj:
            raise SchemaError(f"scenario missing required key {key!r}", path=where)
    dim, alpha, seed = int(obj["dim"]), float(obj["alpha"]), int(obj["seed"])
    redactor = redactor or Redactor.default()
    provider = PseudoEmbedder(dim=dim)
    config = PipelineConfig(redactor=redactor, provider=provider, alpha=alpha,
                            base_seed=seed, dim=dim)

    nodes: dict[str, ServiceNode] = {}
    corpora: dict[str, dict[str, object]] = {}
    for svc in obj["services"]:
        for key in ("service_id", "corpus", "tau"):
            if key not in svc:
                raise SchemaError(f"service entry missing {key!r}", path=where)
        service_id = svc["service_id"]
        if service_id in nodes:
            raise SchemaError(f"duplicate service_id {service_id!r}", path=where)
        corpus_path = Path(svc["corpus"])
        if base_path and not corpus_path.is_absolute():
            corpus_path = base_path.parent / corpus_path
        records = load_corpus(corpus_path).records
        node = ServiceNode(service_id=service_id,
                           store=FingerprintStore(dim=dim), tau=int(svc["tau"]))
        for rec in records:
            red = redactor.redact(rec.text)
            base = quantize(provider.embed(red))
            priv = randomize(base, alpha, derive_seed(seed, service_id, rec.id))
            meta = {"attack_group": rec.attack_group} if rec.attack_group else {}
            node.store.insert(StoredFingerprint(
                id=rec.id, bits=priv.bits, dim=dim, alpha=alpha, metadata=meta))
        nodes[service_id] = node
        corpora[service_id] = {rec.id: rec for rec in records}

    report = CampaignReport(dim=dim, alpha=alpha, seed=seed)
    totals = {sid: {"events_detected": 0, "replies_sent": 0, "matches_reported": 0}
              for sid in nodes}
    linkage: dict[str, set[str]] = {}
    for idx, event in enumerate(obj["events"]):
        for key in ("service", "record_id"):
            if key not in event:
                raise SchemaError(f"event {idx} missing {key!r}", path=where)
        service_id = event["service"]
        if service_id not in nodes:
            raise SchemaError(f"event {idx} names unknown service {service_id!r}",
                              path=where)
        record = corpora[service_id].get(event["record_id"])
        if record is None:
            raise SchemaError(
                f"event {idx}: record {event['record_id']!r} not in corpus of "
                f"{service_id}", path=where)
        node = nodes[service_id]
        composite = ingest_detection(
            node, record.text, dict(event.get("metadata", {})), config,
            fingerprint_id=f"{record.id}#e{idx}", issued_at=idx)
        totals[service_id]["events_detected"] += 1
        peers = [n for sid, n in sorted(nodes.items()) if sid != service_id]
        replies = broadcast(composite, peers) if peers else []
        for reply in replies:
            totals[reply.service_id]["replies_sent"] += 1
            totals[reply.service_id]["matches_reported"] += reply.match_count
            if record.attack_group and reply.match_count > 0 and not reply.error:
                linkage.setdefault(record.attack_group, set()).add(reply.service_id)
        report.events.append(EventOutcome(
            index=idx, service_id=service_id,
            fingerprint_id=composite.fingerprint_id, record_id=record.id,
            attack_group=record.attack_group, replies=replies))
    report.service_totals = totals
    report.linkage = {g: sorted(s) for g, s in linkage.items()}
    return report


def write_demo_scenario(out_dir: str | Path, seed: int = 7, dim: int = 768,
                        alpha: float = 2.0, tau: int = 280) -> Path:
    """Materialize the three-service demo: one attack campaign planted as
    two variants in S1 and one in S3, detected and broadcast by S2.

    With the default parameters the broadcast yields replies of exactly
    2 matches from S1 and 1 from S3.
    """
    from .evaluation import write_corpus_jsonl
    from .records import CorpusRecord
    from .synthetic import SyntheticGenerator

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gen = SyntheticGenerator(seed)
    base = gen.attack_prompt(salt=0)
    group = "grp-demo"

    def benign(n, salt):
        return [CorpusRecord(id=f"{salt}-ben-{i:03d}",
                             text=gen.variant(gen.benign_prompt(), n_substitutions=2)
                             + f" session {gen._tag(i)}",
                             is_attack=False)
                for i in range(n)]

    s1 = benign(30, "s1") + [
        CorpusRecord(id="s1-atk-v1", text=gen.variant(base, n_substitutions=1),
                     is_attack=True, attack_group=group),
        CorpusRecord(id="s1-atk-v2", text=gen.variant(base, n_substitutions=2),
                     is_attack=True, attack_group=group)]
    s2 = benign(30, "s2") + [
        CorpusRecord(id="s2-atk-base", text=base, is_attack=True,
                     attack_group=group)]
    s3 = benign(30, "s3") + [
        CorpusRecord(id="s3-atk-v1", text=gen.variant(base, n_substitutions=1),
                     is_attack=True, attack_group=group)]
    for name, records in (("s1", s1), ("s2", s2), ("s3", s3)):
        write_corpus_jsonl(records, out_dir / f"{name}.jsonl")

    scenario = {
        "dim": dim, "alpha": alpha, "seed": seed,
        "services": [
            {"service_id": "S1", "corpus": "s1.jsonl", "tau": tau},
            {"service_id": "S2", "corpus": "s2.jsonl", "tau": tau},
            {"service_id": "S3", "corpus": "s3.jsonl", "tau": tau},
        ],
        "events": [
            {"service": "S2", "record_id": "s2-atk-base",
             "metadata": {"tool": "email", "region": "eu"}},
        ],
    }
    path = out_dir / "scenario.json"
    path.write_text(json.dumps(scenario, indent=2) + "\n", "utf-8")
    return path
