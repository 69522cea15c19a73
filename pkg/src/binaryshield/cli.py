"""``binaryshield`` command-line interface.

Configuration layering for shared knobs (dim, alpha, seed, tau, provider):
explicit flag > BINARYSHIELD_* environment variable > --config JSON file >
built-in default. Outputs are written atomically (temp file + rename) so a
failed run never leaves a truncated artifact. Exit codes: 0 success,
1 data/runtime error, 2 usage error.
"""

from __future__ import annotations

import base64
import json
import os
import sys
from contextlib import contextmanager
from functools import wraps
from pathlib import Path

import click

from . import bench as bench_mod
from . import kernels
from .embeddings import (ProviderConfig, ProviderKind, build_cache, make_provider)
from .errors import BinaryShieldError
from .evaluation import (BinaryShieldMethod, SimHashMethod, accuracy_at_k,
                         alpha_sweep, calibrate_noise, load_corpus, load_pairs,
                         pr_sweep, storage_report, write_corpus_jsonl,
                         write_pairs_jsonl)
from .fingerprint import PrivacyBudget, quantize, randomize
from .protocol import (FRAME_VERSION, CompositeFingerprint, decode_frame,
                       encode_frame, simulate_campaign, write_demo_scenario)
from .records import VariantType
from .redaction import Redactor, entity_histogram, histogram_to_csv
from .simhash import simhash
from .store import FingerprintStore, ScanMode, StoredFingerprint
from .synthetic import SyntheticGenerator
from .textproc import derive_seed

DEFAULTS = {"dim": 768, "alpha": 2.0, "seed": 0, "tau": None, "provider": "pseudo"}


def _resolve(ctx, name, flag_value, cast=str):
    """flag > env > config file > default, applied uniformly."""
    if flag_value is not None:
        return flag_value
    env = os.environ.get(f"BINARYSHIELD_{name.upper()}")
    if env is not None:
        return cast(env)
    config = (ctx.obj or {}).get("config", {})
    if name in config:
        return cast(config[name])
    return DEFAULTS.get(name)


def _data_errors(fn):
    """Map package/data errors to exit code 1 (usage errors stay 2)."""
    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except (BinaryShieldError, ValueError, TypeError, OSError) as exc:
            raise click.ClickException(str(exc)) from exc
    return wrapper


@contextmanager
def _atomic_output(path: str | Path, mode: str = "w"):
    path = Path(path)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    try:
        with open(tmp, mode, encoding=None if "b" in mode else "utf-8") as fh:
            yield fh
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise
    os.replace(tmp, path)


def _read_prompt_records(path: Path) -> list[dict]:
    from .evaluation import _iter_jsonl

    records = []
    for lineno, obj in _iter_jsonl(path):
        if "id" not in obj or "text" not in obj:
            raise click.ClickException(
                f"{path}:{lineno}: prompt record needs 'id' and 'text'")
        metadata = obj.get("metadata", {})
        if not isinstance(metadata, dict):
            raise click.ClickException(f"{path}:{lineno}: metadata must be an object")
        records.append({"id": str(obj["id"]), "text": str(obj["text"]),
                        "metadata": {str(k): str(v) for k, v in metadata.items()}})
    return records


def _build_provider(ctx, provider, dim, model_id, endpoint_url, api_key_env,
                    cache_path):
    kind = _resolve(ctx, "provider", provider)
    endpoint_url = _resolve(ctx, "endpoint_url", endpoint_url, str)
    api_key_env = _resolve(ctx, "api_key_env", api_key_env, str)
    cache_path = _resolve(ctx, "cache_path", cache_path, str)
    model_id = model_id or f"{kind}-{dim}"
    config = ProviderConfig(kind=ProviderKind(kind), dim=dim, model_id=model_id,
                            endpoint_url=endpoint_url,
                            api_key_env_var=api_key_env, cache_path=cache_path)
    return make_provider(config)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON config file for shared defaults.")
@click.pass_context
def main(ctx, config_path):
    """Privacy-preserving fingerprinting and correlation of flagged prompts."""
    ctx.ensure_object(dict)
    if config_path:
        ctx.obj["config"] = json.loads(Path(config_path).read_text("utf-8"))
    else:
        ctx.obj["config"] = {}


# -- fingerprint ---------------------------------------------------------------

@main.command()
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--service-id", default="local", show_default=True)
@click.option("--dim", type=int, default=None)
@click.option("--alpha", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--provider", type=click.Choice(["pseudo", "file_cache", "remote_http"]),
              default=None)
@click.option("--model-id", default=None)
@click.option("--endpoint-url", default=None)
@click.option("--api-key-env", default=None)
@click.option("--cache-path", default=None)
@click.option("--rules", "rules_path", type=click.Path(exists=True), default=None)
@click.pass_context
@_data_errors
def fingerprint(ctx, input_path, out_path, service_id, dim, alpha, seed, provider,
                model_id, endpoint_url, api_key_env, cache_path, rules_path):
    """Turn prompts (JSONL: id, text, metadata?) into wire frames."""
    dim = _resolve(ctx, "dim", dim, int)
    alpha = _resolve(ctx, "alpha", alpha, float)
    seed = _resolve(ctx, "seed", seed, int)
    redactor = Redactor.from_config(rules_path) if rules_path else Redactor.default()
    prov = _build_provider(ctx, provider, dim, model_id, endpoint_url,
                           api_key_env, cache_path)
    records = _read_prompt_records(Path(input_path))
    frames: list[bytes] = []
    failures: list[str] = []
    for i, rec in enumerate(records):
        try:
            redacted = redactor.redact(rec["text"])
            priv = randomize(quantize(prov.embed(redacted)),
                             PrivacyBudget.of(alpha),
                             derive_seed(seed, service_id, rec["id"]))
            frames.append(encode_frame(CompositeFingerprint(
                version=FRAME_VERSION, origin_service=service_id,
                fingerprint_id=rec["id"], dim=dim, alpha=float(alpha),
                bits_base64=base64.b64encode(priv.bits).decode("ascii"),
                metadata=rec["metadata"], issued_at=i)))
        except Exception as exc:  # reported per record, run continues
            failures.append(f"record {rec['id']!r} (line {i + 1}): {exc}")
    if failures:
        for message in failures:
            click.echo(f"error: {message}", err=True)
        raise click.ClickException(
            f"{len(failures)} of {len(records)} records failed; no output written")
    with _atomic_output(out_path, "wb") as fh:
        for frame in frames:
            fh.write(frame)
    click.echo(f"wrote {len(frames)} frames to {out_path}")


# -- redact ---------------------------------------------------------------------

@main.command()
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--rules", "rules_path", type=click.Path(exists=True), default=None)
@click.option("--histogram", "histogram_path", type=click.Path(dir_okay=False),
              default=None, help="Also write a plot-ready entity-count CSV.")
@_data_errors
def redact(input_path, out_path, rules_path, histogram_path):
    """Redact PII from prompts (JSONL in, JSONL with placeholders out)."""
    redactor = Redactor.from_config(rules_path) if rules_path else Redactor.default()
    records = _read_prompt_records(Path(input_path))
    with _atomic_output(out_path) as fh:
        for rec in records:
            result = redactor.redact(rec["text"])
            fh.write(json.dumps({
                "id": rec["id"], "text": result.text,
                "entity_counts": {t.name: c for t, c in
                                  sorted(result.entity_counts.items(),
                                         key=lambda kv: kv[0].value)},
                "original_length": result.original_length,
            }, separators=(",", ":")) + "\n")
    if histogram_path:
        histogram, skipped = entity_histogram((r["text"] for r in records),
                                              redactor=redactor)
        with _atomic_output(histogram_path) as fh:
            fh.write(histogram_to_csv(histogram))
        if skipped:
            click.echo(f"histogram skipped {skipped} unreadable records", err=True)
    click.echo(f"redacted {len(records)} prompts to {out_path}")


# -- simhash ---------------------------------------------------------------------

@main.command(name="simhash")
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@_data_errors
def simhash_cmd(input_path, out_path):
    """64-bit SimHash fingerprints for prompts (JSONL in/out)."""
    records = _read_prompt_records(Path(input_path))
    with _atomic_output(out_path) as fh:
        for rec in records:
            fp = simhash(rec["text"])
            fh.write(json.dumps({"id": rec["id"], "bits_hex": f"{fp.bits:016x}",
                                 "feature_count": fp.feature_count},
                                separators=(",", ":")) + "\n")
    click.echo(f"wrote {len(records)} fingerprints to {out_path}")


# -- embed-cache -------------------------------------------------------------------

@main.group(name="embed-cache")
def embed_cache():
    """Build or inspect file-backed embedding caches."""


@embed_cache.command(name="build")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="prompt JSONL (id, text)")
@click.option("--pairs", "pairs_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="PairRecord JSONL; caches both prompts")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="CorpusRecord JSONL")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--provider", type=click.Choice(["pseudo", "remote_http"]),
              default=None)
@click.option("--dim", type=int, default=None)
@click.option("--model-id", default=None)
@click.option("--endpoint-url", default=None)
@click.option("--api-key-env", default=None)
@click.option("--redact/--no-redact", "do_redact", default=True,
              show_default=True,
              help="Redact before embedding. Use --no-redact when building a "
                   "cache for the eval harness, which looks texts up as-is.")
@click.option("--rules", "rules_path", type=click.Path(exists=True), default=None)
@click.pass_context
@_data_errors
def embed_cache_build(ctx, input_path, pairs_path, corpus_path, out_path,
                      provider, dim, model_id, endpoint_url, api_key_env,
                      do_redact, rules_path):
    """Embed a dataset's texts through a source provider into a cache file."""
    sources = [p for p in (input_path, pairs_path, corpus_path) if p]
    if len(sources) != 1:
        raise click.UsageError(
            "specify exactly one of --input, --pairs or --corpus")
    dim = _resolve(ctx, "dim", dim, int)
    prov = _build_provider(ctx, provider, dim, model_id, endpoint_url,
                           api_key_env, None)
    if input_path:
        texts = [rec["text"] for rec in _read_prompt_records(Path(input_path))]
    elif pairs_path:
        texts = [t for p in load_pairs(pairs_path).records
                 for t in (p.prompt_a, p.prompt_b)]
    else:
        texts = [r.text for r in load_corpus(corpus_path).records]
    if do_redact:
        redactor = (Redactor.from_config(rules_path) if rules_path
                    else Redactor.default())
        texts = [redactor.redact(t) for t in texts]
    stats = build_cache(texts, prov, out_path, dim=dim)
    click.echo(f"cache {out_path}: wrote {stats['written']}, "
               f"skipped {stats['skipped']} already present/duplicate")


# -- store ---------------------------------------------------------------------

@main.group(name="store")
def store_group():
    """Build and inspect fingerprint store snapshots."""


@store_group.command(name="build")
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Frames JSONL, as produced by the fingerprint command.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@_data_errors
def store_build(input_path, out_path):
    """Ingest wire frames into a searchable store snapshot."""
    store = FingerprintStore()
    count = 0
    with open(input_path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            frame = decode_frame(line)
            store.insert(StoredFingerprint(
                id=frame.fingerprint_id, bits=frame.decoded_bits(),
                dim=frame.dim, alpha=frame.alpha, metadata=frame.metadata))
            count += 1
    tmp = Path(str(out_path) + f".tmp{os.getpid()}")
    try:
        store.save_snapshot(tmp)
        os.replace(tmp, out_path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise
    click.echo(f"stored {count} fingerprints in {out_path}")


# -- search ---------------------------------------------------------------------

@main.command()
@click.option("--store", "store_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--query", "query_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--tau", type=int, default=None)
@click.option("--topk", type=int, default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "table"]),
              default="json", show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@click.pass_context
@_data_errors
def search(ctx, store_path, query_path, tau, topk, fmt, out_path):
    """Search a store snapshot with a fingerprint frame."""
    if (tau is None) == (topk is None):
        raise click.UsageError("specify exactly one of --tau or --topk")
    store = FingerprintStore.load_snapshot(store_path)
    frame_line = Path(query_path).read_text("utf-8").strip().splitlines()
    if not frame_line:
        raise click.ClickException(f"{query_path}: empty query file")
    composite = decode_frame(frame_line[0])
    bits = composite.decoded_bits()
    if tau is not None:
        results = store.search_threshold(bits, tau,
                                         query_metadata=composite.metadata)
    else:
        results = store.search_topk(bits, topk, query_metadata=composite.metadata)
    if fmt == "json":
        lines = [json.dumps({"id": r.id, "distance": r.distance,
                             "metadata_overlap": r.metadata_overlap},
                            separators=(",", ":")) for r in results]
        text = "\n".join(lines) + ("\n" if lines else "")
    else:
        rows = [f"{r.id}\t{r.distance}\t{r.metadata_overlap}" for r in results]
        text = "id\tdistance\tmetadata_overlap\n" + "\n".join(rows) + "\n"
    if out_path:
        with _atomic_output(out_path) as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


# -- simulate ---------------------------------------------------------------------

@main.command()
@click.option("--scenario", "scenario_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "table"]),
              default="json", show_default=True)
@_data_errors
def simulate(scenario_path, out_path, fmt):
    """Replay a scripted multi-service correlation scenario."""
    report = simulate_campaign(scenario_path)
    if out_path:
        with _atomic_output(out_path) as fh:
            fh.write(report.to_json())
    click.echo(report.to_table() if fmt == "table" else report.to_json(), nl=False)


# -- eval -------------------------------------------------------------------------

@main.group(name="eval")
def eval_group():
    """Evaluation harness subcommands."""


def _method_option(method, alpha, seed):
    if method == "simhash":
        return SimHashMethod()
    return BinaryShieldMethod(alpha=None if alpha == "none" else float(alpha),
                              seed=seed)


def _emit(text: str, out_path: str | None):
    if out_path:
        with _atomic_output(out_path) as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


@eval_group.command(name="pr-sweep")
@click.option("--pairs", "pairs_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--method", type=click.Choice(["binaryshield", "simhash"]),
              default="binaryshield", show_default=True)
@click.option("--alpha", default="2.0", help="privacy budget, or 'none'")
@click.option("--seed", type=int, default=None)
@click.option("--dim", type=int, default=None)
@click.option("--provider", type=click.Choice(["pseudo", "file_cache"]),
              default=None, help="embedding source (file_cache for replication)")
@click.option("--cache-path", default=None)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@click.pass_context
@_data_errors
def eval_pr_sweep(ctx, pairs_path, method, alpha, seed, dim, provider,
                  cache_path, out_path):
    """Precision-recall threshold sweep over labeled pairs."""
    seed = _resolve(ctx, "seed", seed, int)
    dim = _resolve(ctx, "dim", dim, int)
    loaded = load_pairs(pairs_path)
    if loaded.dropped_empty or loaded.dropped_duplicate:
        click.echo(f"dropped {loaded.dropped_empty} empty, "
                   f"{loaded.dropped_duplicate} duplicate pairs", err=True)
    prov = _build_provider(ctx, provider, dim, None, None, None, cache_path)
    result = pr_sweep(loaded.records, _method_option(method, alpha, seed),
                      provider=prov)
    _emit(result.to_csv(), out_path)
    click.echo(f"optimal tau={result.optimal.tau} f1={result.optimal.f1:.4f}",
               err=True)


@eval_group.command(name="alpha-sweep")
@click.option("--pairs", "pairs_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--alphas", default="0.25,0.5,0.75,1.0,1.25,1.5,1.75,2.0,2.25,2.5,2.75,3.0",
              show_default=True)
@click.option("--seeds-per-alpha", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--dim", type=int, default=None)
@click.option("--provider", type=click.Choice(["pseudo", "file_cache"]),
              default=None, help="embedding source (file_cache for replication)")
@click.option("--cache-path", default=None)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@click.pass_context
@_data_errors
def eval_alpha_sweep(ctx, pairs_path, alphas, seeds_per_alpha, seed, dim,
                     provider, cache_path, out_path):
    """Privacy-utility sweep: mean optimal metrics per alpha."""
    seed = _resolve(ctx, "seed", seed, int)
    dim = _resolve(ctx, "dim", dim, int)
    prov = _build_provider(ctx, provider, dim, None, None, None, cache_path)
    loaded = load_pairs(pairs_path)
    result = alpha_sweep(loaded.records,
                         [float(a) for a in alphas.split(",") if a],
                         seeds_per_alpha=seeds_per_alpha, base_seed=seed,
                         provider=prov)
    _emit(result.to_csv(), out_path)


@eval_group.command(name="calibrate-noise")
@click.option("--n-prompts", type=int, default=500, show_default=True)
@click.option("--alphas", default="0.2,0.6,1.0,1.4,1.8,2.2,2.6,3.0,3.4",
              show_default=True)
@click.option("--dim", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@click.pass_context
@_data_errors
def eval_calibrate_noise(ctx, n_prompts, alphas, dim, seed, out_path):
    """Self-Hamming distortion vs the (1-p)d theory curve."""
    seed = _resolve(ctx, "seed", seed, int)
    dim = _resolve(ctx, "dim", dim, int)
    result = calibrate_noise(n_prompts, [float(a) for a in alphas.split(",") if a],
                             dim=dim, seed=seed)
    _emit(result.to_csv(), out_path)


@eval_group.command(name="accuracy-at-k")
@click.option("--corpus", "corpus_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--queries", "queries_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--method", type=click.Choice(["binaryshield", "simhash", "dense"]),
              default="binaryshield", show_default=True)
@click.option("--k", "k_values", default="1,3,5", show_default=True)
@click.option("--alpha", default="2.0", help="privacy budget, or 'none'")
@click.option("--seed", type=int, default=None)
@click.option("--dim", type=int, default=None)
@click.option("--provider", type=click.Choice(["pseudo", "file_cache"]),
              default=None, help="embedding source (file_cache for replication)")
@click.option("--cache-path", default=None)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@click.pass_context
@_data_errors
def eval_accuracy_at_k(ctx, corpus_path, queries_path, method, k_values, alpha,
                       seed, dim, provider, cache_path, out_path):
    """Top-k retrieval accuracy over a hybrid corpus."""
    seed = _resolve(ctx, "seed", seed, int)
    dim = _resolve(ctx, "dim", dim, int)
    prov = _build_provider(ctx, provider, dim, None, None, None, cache_path)
    corpus = load_corpus(corpus_path).records
    queries = load_corpus(queries_path).records
    result = accuracy_at_k(corpus, queries, method=method,
                           k_values=[int(k) for k in k_values.split(",") if k],
                           alpha=None if alpha == "none" else float(alpha),
                           seed=seed, provider=prov)
    _emit(result.to_csv(), out_path)


@eval_group.command(name="storage")
@click.option("--count", type=int, required=True)
@click.option("--dim", type=int, default=None)
@click.option("--float-bytes", type=click.Choice(["4", "8"]), default="4",
              show_default=True)
@click.option("--measure", is_flag=True,
              help="Also build a random store snapshot and report its size.")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@click.pass_context
@_data_errors
def eval_storage(ctx, count, dim, float_bytes, measure, seed, out_path):
    """Dense vs binary storage accounting."""
    dim = _resolve(ctx, "dim", dim, int)
    seed = _resolve(ctx, "seed", seed, int)
    measured = None
    if measure:
        import tempfile

        store = bench_mod.make_random_store(count, dim, seed)
        with tempfile.TemporaryDirectory() as tmp:
            snap = Path(tmp) / "store.bsfp"
            store.save_snapshot(snap)
            measured = snap.stat().st_size
    result = storage_report(count, dim, float_bytes=int(float_bytes),
                            measured_binary_bytes=measured)
    _emit(result.to_csv(), out_path)


# -- bench ---------------------------------------------------------------------

@main.group()
def bench():
    """Performance benchmarks."""


@bench.command(name="scan")
@click.option("--size", type=int, default=100_000, show_default=True)
@click.option("--queries", "n_queries", type=int, default=968, show_default=True)
@click.option("--dim", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@click.pass_context
@_data_errors
def bench_scan(ctx, size, n_queries, dim, seed, out_path):
    """Packed-Hamming vs dense-cosine per-query scan timing."""
    dim = _resolve(ctx, "dim", dim, int)
    seed = _resolve(ctx, "seed", seed, int)
    report = bench_mod.efficiency_run(size, n_queries, dim=dim, seed=seed)
    _emit(report.to_json() + "\n", out_path)
    click.echo(f"packed {report.packed.total_seconds:.3f}s, "
               f"dense {report.dense.total_seconds:.3f}s, "
               f"speedup {report.speedup:.1f}x", err=True)


@bench.command(name="kernels")
@click.option("--size", type=int, default=50_000, show_default=True)
@click.option("--queries", "n_queries", type=int, default=200, show_default=True)
@click.option("--dim", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.pass_context
@_data_errors
def bench_kernels(ctx, size, n_queries, dim, seed):
    """Compare the numba kernel against the pure-numpy fallback."""
    dim = _resolve(ctx, "dim", dim, int)
    seed = _resolve(ctx, "seed", seed, int)
    reports = bench_mod.compare_backends(size, n_queries, dim=dim, seed=seed)
    for backend, report in sorted(reports.items()):
        click.echo(f"{backend}: total {report.total_seconds:.3f}s "
                   f"({report.mean_query_seconds * 1e3:.3f} ms/query)")
    if "numba" in reports and "numpy" in reports:
        ratio = reports["numpy"].total_seconds / reports["numba"].total_seconds
        click.echo(f"numba speedup over numpy: {ratio:.1f}x")
    if not kernels.HAVE_NUMBA:
        click.echo("numba not available; only the numpy fallback was timed")


# -- gen ---------------------------------------------------------------------

@main.group()
def gen():
    """Generate seeded synthetic datasets."""


@gen.command(name="pairs")
@click.option("--attack", "n_attack", type=int, default=500, show_default=True)
@click.option("--benign", "n_benign", type=int, default=500, show_default=True)
@click.option("--variant", type=click.Choice([v.value for v in VariantType
                                              if v is not VariantType.BENIGN_PAIR]),
              default="PARAPHRASE", show_default=True)
@click.option("--rate", type=float, default=0.7, show_default=True,
              help="eligible-token substitution rate for PARAPHRASE")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.pass_context
@_data_errors
def gen_pairs(ctx, n_attack, n_benign, variant, rate, seed, out_path):
    """Labeled attack-variant / benign pair JSONL."""
    seed = _resolve(ctx, "seed", seed, int)
    pairs = SyntheticGenerator(seed).make_pairs(
        n_attack, n_benign, variant_type=VariantType(variant), rate=rate)
    with _atomic_output(out_path) as fh:
        write_pairs_jsonl(pairs, fh)
    click.echo(f"wrote {len(pairs)} pairs to {out_path}")


@gen.command(name="corpus")
@click.option("--size", type=int, default=10_000, show_default=True)
@click.option("--groups", type=int, default=50, show_default=True)
@click.option("--variants-per-group", type=int, default=3, show_default=True)
@click.option("--queries-per-group", type=int, default=1, show_default=True)
@click.option("--rate", type=float, default=0.7, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--queries-out", "queries_path", required=True,
              type=click.Path(dir_okay=False))
@click.pass_context
@_data_errors
def gen_corpus(ctx, size, groups, variants_per_group, queries_per_group, rate,
               seed, out_path, queries_path):
    """Hybrid corpus (sparse attacks in benign traffic) plus queries."""
    seed = _resolve(ctx, "seed", seed, int)
    corpus, queries = SyntheticGenerator(seed).make_hybrid_corpus(
        size, groups, variants_per_group=variants_per_group,
        queries_per_group=queries_per_group, rate=rate)
    with _atomic_output(out_path) as fh:
        write_corpus_jsonl(corpus, fh)
    with _atomic_output(queries_path) as fh:
        write_corpus_jsonl(queries, fh)
    click.echo(f"wrote {len(corpus)} corpus records and {len(queries)} queries")


@gen.command(name="scenario")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=None)
@click.option("--dim", type=int, default=None)
@click.option("--alpha", type=float, default=None)
@click.option("--tau", type=int, default=280, show_default=True)
@click.pass_context
@_data_errors
def gen_scenario(ctx, out_dir, seed, dim, alpha, tau):
    """Three-service demo scenario with planted attack variants."""
    seed = _resolve(ctx, "seed", seed, int)
    dim = _resolve(ctx, "dim", dim, int)
    alpha = _resolve(ctx, "alpha", alpha, float)
    path = write_demo_scenario(out_dir, seed=seed, dim=dim, alpha=alpha, tau=tau)
    click.echo(f"wrote scenario to {path}")


if __name__ == "__main__":
    main()
