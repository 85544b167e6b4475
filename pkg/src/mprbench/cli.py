"""Command-line entry point.

Subcommands:
    ingest      read + validate embedding stores, print a summary
    eval        rank probes against a gallery and score Recall@K / CMC
    reproduce   rebuild every reference table and diff against published values
    caption     refine catalog descriptions through a chat endpoint and audit

Settings resolve as defaults < config file (key=value lines) < flags; the
endpoint auth token comes from the MPRBENCH_API_TOKEN environment variable
(config key api_token as fallback). Reruns on identical inputs rewrite
byte-identical outputs. Exit code 0 means no error-class condition occurred.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import analysis, reports, retrieval, similarity, store
from .captions import bpe, client, pipeline

TOKEN_ENV_VAR = "MPRBENCH_API_TOKEN"
DEFAULT_K = (1, 3, 5)


@dataclass(frozen=True)
class RunConfig:
    """One command's fully resolved settings (defaults < config file < flags).

    Input paths are checked for existence here, before any work starts; K
    cutoffs must be positive and are re-checked against the gallery size once
    it is known.
    """

    command: str
    probes: str | None = None
    gallery: str | None = None
    truth: str | None = None
    reference: str | None = None
    catalog: str | None = None
    out: str = "."
    k_list: tuple[int, ...] = DEFAULT_K
    token_budget: int = bpe.DEFAULT_BUDGET
    workers: int = 1
    endpoint_url: str | None = None
    endpoint_model: str = "captioner"
    api_token: str | None = None
    retry: int = 3
    timeout_s: float = 30.0
    backoff_s: float = 0.5

    def __post_init__(self):
        if any(k < 1 for k in self.k_list):
            raise ValueError(f"K cutoffs must be positive, got {self.k_list}")
        if self.token_budget < 1:
            raise ValueError(f"token_budget must be positive, got {self.token_budget}")
        if self.workers < 1:
            raise ValueError(f"workers must be at least 1, got {self.workers}")
        for label in ("probes", "gallery", "truth", "reference", "catalog"):
            path = getattr(self, label)
            if path is not None and not Path(path).exists():
                raise FileNotFoundError(f"--{label} path does not exist: {path}")

    def endpoint(self) -> client.EndpointConfig:
        return client.EndpointConfig(
            url=self.endpoint_url,
            model=self.endpoint_model,
            api_token=self.api_token,
            max_attempts=self.retry,
            timeout_s=self.timeout_s,
            backoff_s=self.backoff_s,
        )

    @property
    def out_dir(self) -> Path:
        return Path(self.out)


def _load_config_file(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    config: dict[str, str] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        config[key.strip()] = value.strip()
    return config


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge argparse flags over the config file over defaults."""
    settings = _load_config_file(args.config)

    def pick(key, default=None, cast=str):
        flag = getattr(args, key, None)
        if flag is not None:
            return flag
        if key in settings:
            return cast(settings[key])
        return default

    k_raw = pick("k", default=None)
    k_list = tuple(int(k) for k in str(k_raw).split(",")) if k_raw is not None else DEFAULT_K
    return RunConfig(
        command=args.command,
        probes=pick("probes"),
        gallery=pick("gallery"),
        truth=pick("truth"),
        reference=pick("reference"),
        catalog=pick("catalog"),
        out=pick("out", default="reproduction" if args.command == "reproduce" else "."),
        k_list=k_list,
        token_budget=int(pick("token_budget", default=bpe.DEFAULT_BUDGET, cast=int)),
        workers=int(pick("workers", default=1, cast=int)),
        endpoint_url=pick("endpoint_url"),
        endpoint_model=pick("endpoint_model", default="captioner"),
        api_token=os.environ.get(TOKEN_ENV_VAR) or settings.get("api_token"),
        retry=int(pick("retry", default=3, cast=int)),
        timeout_s=float(pick("timeout", default=30.0, cast=float)),
        backoff_s=float(pick("backoff", default=0.5, cast=float)),
    )


def _fail(exc: Exception) -> int:
    print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return 1


def _read_truth(path: str) -> retrieval.ProbeSet:
    p = Path(path)
    if p.suffix.lower() == ".json":
        mapping = json.loads(p.read_text(encoding="utf-8"))
        return retrieval.ProbeSet.from_mapping({str(k): str(v) for k, v in mapping.items()})
    import csv as _csv

    mapping = {}
    with open(p, newline="", encoding="utf-8") as fh:
        for rec in _csv.DictReader(fh):
            mapping[str(rec["probe_id"])] = str(rec["gallery_id"])
    return retrieval.ProbeSet.from_mapping(mapping)


def cmd_ingest(run: RunConfig) -> int:
    loaded = []
    try:
        for label, path in (("probes", run.probes), ("gallery", run.gallery)):
            if path is None:
                continue
            matrix, manifest = store.read_embeddings(path)
            report = store.validate(matrix)
            loaded.append((label, matrix))
            print(f"{label}: {matrix.count} x {matrix.dim} ({manifest.model.name}, side={matrix.side.value})")
            if not report.clean:
                for finding in report.findings():
                    print(f"  finding: {finding}", file=sys.stderr)
                print(f"error: ValidationFailure: {path} has {len(report.findings())} finding(s)", file=sys.stderr)
                return 1
    except store.StoreError as exc:
        return _fail(exc)

    if not loaded:
        print("error: nothing to ingest; pass --probes and/or --gallery", file=sys.stderr)
        return 1
    if len(loaded) == 2 and loaded[0][1].dim != loaded[1][1].dim:
        return _fail(similarity.DimensionMismatch(f"probe dim {loaded[0][1].dim} != gallery dim {loaded[1][1].dim}"))
    print("ok")
    return 0


def cmd_eval(run: RunConfig) -> int:
    try:
        probes, probe_manifest = store.read_embeddings(run.probes)
        gallery, _ = store.read_embeddings(run.gallery)
        for label, matrix in (("probes", probes), ("gallery", gallery)):
            report = store.validate(matrix)
            if not report.clean:
                print(f"error: ValidationFailure: {label}: {'; '.join(report.findings())}", file=sys.stderr)
                return 1
        truth = _read_truth(run.truth)
        scores = similarity.score_matrix(probes, gallery, workers=run.workers)
        ranking = similarity.rank(scores)
        result = retrieval.evaluate(ranking, truth, ks=run.k_list, model=probe_manifest.model)
    except (store.StoreError, similarity.SimilarityError, retrieval.MetricError, OSError) as exc:
        return _fail(exc)

    run.out_dir.mkdir(parents=True, exist_ok=True)
    result.write(run.out_dir / "eval_report.json", run.out_dir / "eval_report.csv")
    print(f"model: {probe_manifest.model.name}")
    print(f"probes: {result.probe_count}  gallery: {result.gallery_size}")
    for k in run.k_list:
        print(f"recall@{k}: {result.recall_at[k]:.3f}")
    if result.gap_delta is not None:
        print(f"gap (recall@5 - recall@1): {result.gap_delta:.3f}")
    print(f"wrote {run.out_dir / 'eval_report.json'} and {run.out_dir / 'eval_report.csv'}")
    return 0


def cmd_reproduce(run: RunConfig) -> int:
    try:
        table = analysis.ResultsTable.from_csv(run.reference) if run.reference else analysis.ResultsTable.bundled()
    except (OSError, ValueError) as exc:
        return _fail(exc)

    bundle = reports.reproduce_all(table)
    written = bundle.write(run.out_dir)
    for t in bundle.tables:
        bad = sum(1 for c in t.cells if not c.ok)
        verdict = "ok" if bad == 0 else f"FAIL ({bad} cell(s) out of tolerance)"
        print(f"{t.name}: {len(t.cells)} checked cell(s): {verdict}")
    for name, reason in bundle.skipped:
        print(f"warning: skipped {name}: {reason}", file=sys.stderr)
    if not bundle.tables:
        print("warning: nothing reproduced (empty reference table)", file=sys.stderr)
    print(f"wrote {len(written)} file(s) under {run.out_dir}")
    return 0


def cmd_caption(run: RunConfig) -> int:
    if not run.endpoint_url:
        print("error: no endpoint URL (use --endpoint-url or config endpoint_url)", file=sys.stderr)
        return 1
    try:
        catalog = pipeline.read_catalog(run.catalog)
    except (OSError, KeyError, ValueError, pipeline.EmptyMetadata) as exc:
        return _fail(exc)

    rows = client.caption_catalog(catalog, run.endpoint(), run.token_budget, workers=run.workers)
    by_sku = {meta.sku_id: meta for meta in catalog}
    audits = [
        pipeline.audit_caption(row["caption"], by_sku[row["sku_id"]], run.token_budget)
        for row in rows
        if row.get("caption") is not None
    ]

    run.out_dir.mkdir(parents=True, exist_ok=True)
    pipeline.write_captions(run.out_dir / "captions.jsonl", rows)
    pipeline.write_audits(run.out_dir / "audits.jsonl", audits)

    failures = [r for r in rows if r.get("caption") is None]
    for row in failures:
        print(f"warning: {row['sku_id']}: {row['error_kind']}: {row['error']}", file=sys.stderr)
    if audits:
        compliance = sum(a.token_compliant for a in audits) / len(audits)
        prefix = sum(a.prefix_ok for a in audits) / len(audits)
        retention = sum(not a.missing_attributes for a in audits) / len(audits)
        passed = sum(a.pass_ for a in audits) / len(audits)
        print(f"captions: {len(audits)}/{len(rows)} rows")
        print(f"token compliance: {compliance:.1%}  prefix: {prefix:.1%}  attribute retention: {retention:.1%}  pass: {passed:.1%}")
    if rows and len(failures) == len(rows) and all(r.get("error_kind") == "EndpointUnreachable" for r in failures):
        print(f"error: EndpointUnreachable: all {len(rows)} requests failed", file=sys.stderr)
        return 1
    print(f"wrote {run.out_dir / 'captions.jsonl'} and {run.out_dir / 'audits.jsonl'}")
    return 0


_COMMANDS = {
    "ingest": cmd_ingest,
    "eval": cmd_eval,
    "reproduce": cmd_reproduce,
    "caption": cmd_caption,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mprbench", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", help="key=value settings file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="read and validate embedding stores")
    p_ingest.add_argument("--probes")
    p_ingest.add_argument("--gallery")

    p_eval = sub.add_parser("eval", help="rank probes against a gallery and report Recall@K")
    p_eval.add_argument("--probes", required=True)
    p_eval.add_argument("--gallery", required=True)
    p_eval.add_argument("--truth", required=True, help="probe_id -> gallery_id mapping (.csv or .json)")
    p_eval.add_argument("--k", help="comma-separated cutoffs, default 1,3,5")
    p_eval.add_argument("--out")
    p_eval.add_argument("--workers", type=int)

    p_repro = sub.add_parser("reproduce", help="rebuild reference tables and diff vs published values")
    p_repro.add_argument("--reference", help="reference CSV; defaults to the bundled one")
    p_repro.add_argument("--out")

    p_caption = sub.add_parser("caption", help="refine catalog descriptions and audit the results")
    p_caption.add_argument("--catalog", required=True, help="catalog .csv or .jsonl")
    p_caption.add_argument("--endpoint-url", dest="endpoint_url")
    p_caption.add_argument("--token-budget", dest="token_budget", type=int)
    p_caption.add_argument("--workers", type=int)
    p_caption.add_argument("--out")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = resolve_config(args)
    except (OSError, ValueError) as exc:
        return _fail(exc)
    return _COMMANDS[run.command](run)


if __name__ == "__main__":
    raise SystemExit(main())
