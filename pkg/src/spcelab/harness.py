"""Orchestration: run simulations, persist artifacts, dispatch analyses.

Determinism contract
--------------------
``simulate`` derives one substream per (setting, batch) from the master
seed through the counter-based scheme in :mod:`spcelab.streams` and cuts
the trial range into fixed-size batches, so the written series bytes are
a pure function of (config, seed) regardless of how many workers run the
batches.  Generated-on-the-fly seeds are recorded in the stored config,
which makes every run replayable.

Artifacts per run directory: ``config.txt`` (canonical resolved config),
one ``series_<setting_id>.csv`` per setting, and ``manifest.txt`` with
the run id, config hash, per-file checksums, timestamps and versions.
The run id is derived from the config hash, so identical experiments map
to identical ids; timestamps record wall-clock history and are the only
manifest fields that vary between identical reruns.
"""

from __future__ import annotations

import hashlib
import itertools
import os
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import scipy

from . import __version__
from .backend import backend_name
from .chsh import chsh_from_series
from .config import ExperimentConfig, SettingSpec
from .contextual import CapDistribution, ExperimentSetting, sample_contextual_trials
from .directions import Direction
from .errors import ConfigError, DataError, ParameterError, SpceLabError
from .lrhv import (
    AtomicEnsemble,
    DeterministicSignResponse,
    SphereEnsemble,
    check_factorization,
    linear_response,
    load_table_kernel,
    sample_series,
)
from .purity import DEFAULT_ALPHA, PurityConfig, purity_suite
from .series import TimeSeries
from .series_io import format_kv_csv, format_kv_text, parse_kv_text, read_series, write_series
from .streams import DOMAIN_ANALYSIS, DOMAIN_SIMULATE, substream

OUT_DIR_ENV = "SPCELAB_OUT_DIR"
BATCH_TRIALS = 1 << 16
ANALYSIS_KINDS = ("chsh", "purity", "factorization")
SWEEP_METRICS = ("chsh", "gap")
_MASK64 = (1 << 64) - 1
_PARALLEL_DOT_TOL = 1e-12


def generate_seed() -> int:
    """Fresh 64-bit master seed from OS entropy."""
    return int(np.random.SeedSequence().entropy) & _MASK64


def resolve_out_dir(explicit: Optional[str] = None, config_out: Optional[str] = None) -> str:
    """Output directory precedence: explicit flag, config, environment, cwd."""
    for candidate in (explicit, config_out, os.environ.get(OUT_DIR_ENV)):
        if candidate:
            return os.fspath(candidate)
    return "."


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _sha256_file(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


# ---------------------------------------------------------------------------
# run manifest


@dataclass(frozen=True)
class RunManifest:
    """Provenance record for one simulate run."""

    run_id: str
    config_hash: str
    seed: int
    created_utc: str
    finished_utc: str
    artifacts: Tuple[Tuple[str, str, str], ...]  # (name, relative path, sha256)
    versions: Tuple[Tuple[str, str], ...]
    root: str = ""  # directory the manifest lives in; not serialized

    def to_text(self) -> str:
        pairs = [
            ("run_id", self.run_id),
            ("config_hash", self.config_hash),
            ("seed", str(self.seed)),
            ("created_utc", self.created_utc),
            ("finished_utc", self.finished_utc),
        ]
        for name, rel, digest in self.artifacts:
            pairs.append((f"artifact.{name}.path", rel))
            pairs.append((f"artifact.{name}.sha256", digest))
        for name, value in self.versions:
            pairs.append((f"version.{name}", value))
        return format_kv_text(pairs)

    @classmethod
    def from_text(cls, text: str, root: str = "", path: str = "<manifest>") -> "RunManifest":
        kv = parse_kv_text(text, path)
        try:
            artifacts = []
            for key in kv:
                if key.startswith("artifact.") and key.endswith(".path"):
                    name = key[len("artifact."):-len(".path")]
                    artifacts.append((name, kv[key], kv[f"artifact.{name}.sha256"]))
            versions = tuple(
                (key[len("version."):], value) for key, value in kv.items() if key.startswith("version.")
            )
            return cls(
                run_id=kv["run_id"],
                config_hash=kv["config_hash"],
                seed=int(kv["seed"]),
                created_utc=kv["created_utc"],
                finished_utc=kv["finished_utc"],
                artifacts=tuple(artifacts),
                versions=versions,
                root=root,
            )
        except KeyError as exc:
            raise DataError(f"{path}: manifest is missing key {exc}") from None

    def artifact_path(self, name: str) -> str:
        for art_name, rel, _ in self.artifacts:
            if art_name == name:
                return os.path.join(self.root, rel)
        raise DataError(f"manifest has no artifact named {name!r}")

    def series_items(self) -> Tuple[Tuple[str, str], ...]:
        """(setting_id, absolute path) pairs in settings order."""
        items = []
        for name, rel, _ in self.artifacts:
            if name.startswith("series."):
                items.append((name[len("series."):], os.path.join(self.root, rel)))
        return tuple(items)

    def verify(self) -> Tuple[str, ...]:
        """Recompute artifact checksums; return the names that mismatch."""
        bad = []
        for name, rel, digest in self.artifacts:
            path = os.path.join(self.root, rel)
            if not os.path.exists(path) or _sha256_file(path) != digest:
                bad.append(name)
        return tuple(bad)


def load_manifest(path) -> RunManifest:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return RunManifest.from_text(text, root=os.path.dirname(os.path.abspath(path)), path=str(path))


# ---------------------------------------------------------------------------
# simulate


def _build_ensemble(cfg: ExperimentConfig):
    if cfg.ensemble == "sphere":
        return SphereEnsemble()
    lams = np.array([d.vec for d, _ in cfg.atoms], dtype=np.float64)
    counts = np.array([c for _, c in cfg.atoms], dtype=np.int64)
    return AtomicEnsemble(lams, counts)


def _build_response(cfg: ExperimentConfig):
    if cfg.response == "deterministic-sign":
        return DeterministicSignResponse()
    return linear_response()


def _contextual_setting(cfg: ExperimentConfig, spec: SettingSpec) -> ExperimentSetting:
    return ExperimentSetting(
        CapDistribution(spec.a, cfg.epsilon, profile=cfg.profile, sigma=cfg.sigma),
        CapDistribution(spec.b, cfg.epsilon, profile=cfg.profile, sigma=cfg.sigma),
        eta_a=cfg.eta_a,
        eta_b=cfg.eta_b,
    )


def _simulate_batch(cfg: ExperimentConfig, spec: SettingSpec, index: int, batch: int, count: int):
    rng = substream(cfg.seed, DOMAIN_SIMULATE, index=index, batch=batch)
    if cfg.model == "quantum":
        from .quantum import build_singlet, sample_trials

        return sample_trials(build_singlet(), spec.a, spec.b, count, rng)
    if cfg.model == "contextual":
        return sample_contextual_trials(_contextual_setting(cfg, spec), count, rng)
    return sample_series(_build_ensemble(cfg), _build_response(cfg), spec.a, spec.b, count, rng, order=cfg.order)


def _batch_plan(cfg: ExperimentConfig) -> Tuple[int, ...]:
    """Batch sizes for one setting.  Order-constrained generation (blocked
    or shuffled draws form one population) runs as a single batch."""
    n = cfg.n_trials
    if cfg.model == "lrhv" and cfg.order != "iid":
        return (n,)
    full, rest = divmod(n, BATCH_TRIALS)
    return (BATCH_TRIALS,) * full + ((rest,) if rest else ())


def simulate(config: ExperimentConfig, out_dir: Optional[str] = None, parallelism: int = 1) -> RunManifest:
    """Generate one series file per setting plus config copy and manifest.

    Identical (config, seed) inputs produce byte-identical series and
    config files at any ``parallelism``; a missing seed is generated once
    and recorded, making the stored run self-reproducing.
    """
    if parallelism < 1:
        raise ParameterError(f"parallelism must be >= 1, got {parallelism}")
    created = _utc_now()
    cfg = config if config.seed is not None else config.with_seed(generate_seed())
    root = resolve_out_dir(out_dir, cfg.out)
    os.makedirs(root, exist_ok=True)
    config_hash = cfg.config_hash()
    run_id = "run-" + config_hash[:12]

    plans = []
    buffers = []
    tasks = []
    for i, spec in enumerate(cfg.settings):
        sizes = _batch_plan(cfg)
        plans.append(sizes)
        x = np.empty(cfg.n_trials, dtype=np.int8)
        y = np.empty(cfg.n_trials, dtype=np.int8)
        buffers.append((x, y))
        offset = 0
        for b, count in enumerate(sizes):
            tasks.append((i, spec, b, offset, count))
            offset += count

    def run_task(task):
        i, spec, b, offset, count = task
        x, y = _simulate_batch(cfg, spec, i, b, count)
        buffers[i][0][offset : offset + count] = x
        buffers[i][1][offset : offset + count] = y

    if parallelism == 1:
        for task in tasks:
            run_task(task)
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            list(pool.map(run_task, tasks))

    artifacts = []
    config_path = os.path.join(root, "config.txt")
    with open(config_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(cfg.canonical_text())
    artifacts.append(("config", "config.txt", _sha256_file(config_path)))
    for i, spec in enumerate(cfg.settings):
        series = TimeSeries(
            setting_id=spec.setting_id,
            x=buffers[i][0],
            y=buffers[i][1],
            run_id=run_id,
            seed=cfg.seed,
            model_tag=cfg.model,
        )
        rel = f"series_{spec.setting_id}.csv"
        write_series(series, os.path.join(root, rel))
        artifacts.append((f"series.{spec.setting_id}", rel, _sha256_file(os.path.join(root, rel))))

    manifest = RunManifest(
        run_id=run_id,
        config_hash=config_hash,
        seed=cfg.seed,
        created_utc=created,
        finished_utc=_utc_now(),
        artifacts=tuple(artifacts),
        versions=(
            ("package", __version__),
            ("python", platform.python_version()),
            ("numpy", np.__version__),
            ("scipy", scipy.__version__),
            ("backend", backend_name()),
        ),
        root=os.path.abspath(root),
    )
    with open(os.path.join(root, "manifest.txt"), "w", encoding="utf-8", newline="") as fh:
        fh.write(manifest.to_text())
    return manifest


# ---------------------------------------------------------------------------
# analyze


@dataclass(frozen=True)
class AnalysisResult:
    """One analysis report: flat key-value pairs plus a verdict."""

    kind: str
    pairs: Tuple[Tuple[str, str], ...]
    rejects: bool

    def text(self) -> str:
        return format_kv_text(self.pairs)

    def csv(self) -> str:
        return format_kv_csv(self.pairs)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def analyze_chsh(paths: Sequence, normalization: str = "detected") -> AnalysisResult:
    if len(paths) != 4:
        raise ParameterError(f"chsh analysis needs 4 series files in term order, got {len(paths)}")
    runs = [read_series(p) for p in paths]
    ids = [s.setting_id for s in runs]
    if len(set(ids)) != 4:
        raise DataError(f"chsh inputs must carry 4 distinct setting ids, got {ids}")
    report = chsh_from_series(runs, normalization=normalization)
    pairs = [("analysis", "chsh"), ("normalization", normalization)]
    for k, (sid, corr) in enumerate(zip(ids, report.correlations), start=1):
        pairs.append((f"term.{k}.setting", sid))
        pairs.append((f"term.{k}.value", _fmt(corr.value)))
        pairs.append((f"term.{k}.standard_error", _fmt(corr.standard_error)))
        pairs.append((f"term.{k}.n_detected", str(corr.n_detected)))
        pairs.append((f"term.{k}.n_trials", str(corr.n_trials)))
    pairs += [
        ("s_value", _fmt(report.s_value)),
        ("standard_error", _fmt(report.standard_error)),
        ("abs_s", _fmt(report.abs_s)),
        ("max_sign_variant", _fmt(report.max_sign_variant)),
        ("classical_bound", _fmt(report.bound_classical)),
        ("violation_flag", _fmt(report.violation_flag)),
    ]
    return AnalysisResult(kind="chsh", pairs=tuple(pairs), rejects=report.violation_flag)


def analyze_purity(
    path,
    seed: int = 0,
    alpha: float = DEFAULT_ALPHA,
    n_subsamples: int = 5,
    fraction: float = 0.1,
) -> AnalysisResult:
    series = read_series(path)
    cfg = PurityConfig(alpha=alpha, n_subsamples=n_subsamples, fraction=fraction)
    rng = substream(seed, DOMAIN_ANALYSIS, index=0)
    suite = purity_suite(series, rng, cfg)
    pairs = [
        ("analysis", "purity"),
        ("setting", series.setting_id),
        ("n_trials", str(series.n_trials)),
        ("n_detected", str(series.n_detected)),
        ("alpha", _fmt(alpha)),
        ("family_alpha", _fmt(suite.family_alpha)),
        ("subsample_seed", str(seed)),
    ]
    for report in suite.reports:
        base = f"test.{report.test_name}"
        pairs.append((f"{base}.applicable", _fmt(report.applicable)))
        pairs.append((f"{base}.statistic", _fmt(report.statistic)))
        pairs.append((f"{base}.p_value", _fmt(report.p_value)))
        pairs.append((f"{base}.reject", _fmt(report.reject)))
        if report.warning:
            pairs.append((f"{base}.warning", report.warning))
    pairs.append(("pure_consistent", _fmt(suite.pure_consistent)))
    return AnalysisResult(kind="purity", pairs=tuple(pairs), rejects=not suite.pure_consistent)


def analyze_factorization(path, tol: float = 1e-10) -> AnalysisResult:
    table = load_table_kernel(path)

    def kernel(a, b, lam):
        return table.cell(int(lam), int(a))

    grid = [
        (int(did), int(did), int(lid))
        for did in table.direction_ids
        for lid in table.lambda_ids
    ]
    report = check_factorization(kernel, grid, tol=tol)
    pairs = (
        ("analysis", "factorization"),
        ("n_lambda", str(table.lambda_ids.size)),
        ("n_directions", str(table.direction_ids.size)),
        ("n_points", str(report.n_points)),
        ("tol", _fmt(report.tol)),
        ("max_violation", _fmt(report.max_violation)),
        ("factorizes", _fmt(report.passed)),
    )
    return AnalysisResult(kind="factorization", pairs=pairs, rejects=not report.passed)


def analyze(kind: str, inputs: Sequence, **options) -> AnalysisResult:
    """Dispatch one analysis; ``rejects`` on the result drives exit codes."""
    if kind == "chsh":
        return analyze_chsh(inputs, **options)
    if kind == "purity":
        if len(inputs) != 1:
            raise ParameterError(f"purity analysis takes exactly 1 series file, got {len(inputs)}")
        return analyze_purity(inputs[0], **options)
    if kind == "factorization":
        if len(inputs) != 1:
            raise ParameterError(f"factorization analysis takes exactly 1 table file, got {len(inputs)}")
        return analyze_factorization(inputs[0], **options)
    raise ParameterError(f"unknown analysis kind {kind!r}; expected one of {', '.join(ANALYSIS_KINDS)}")


def write_report(result: AnalysisResult, out_dir, fmt: str = "text") -> str:
    os.makedirs(out_dir, exist_ok=True)
    if fmt == "text":
        name, content = f"report_{result.kind}.txt", result.text()
    elif fmt == "csv":
        name, content = f"report_{result.kind}.csv", result.csv()
    else:
        raise ParameterError(f"format must be 'text' or 'csv', got {fmt!r}")
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(content)
    return path


# ---------------------------------------------------------------------------
# sweep


@dataclass(frozen=True)
class SweepRow:
    index: int
    overrides: Tuple[Tuple[str, str], ...]
    status: str  # "ok" or "failed"
    value: Optional[float]
    standard_error: Optional[float]
    detail: str = ""


@dataclass(frozen=True)
class SweepResult:
    metric: str
    master_seed: int
    rows: Tuple[SweepRow, ...]
    csv_path: str

    @property
    def failures(self) -> Tuple[SweepRow, ...]:
        return tuple(r for r in self.rows if r.status != "ok")


def _derive_point_seed(master_seed: int, index: int) -> int:
    digest = hashlib.sha256(f"sweep:{master_seed}:{index}".encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big")


def _gap_from_series(series: TimeSeries) -> Tuple[float, float]:
    """Equal-settings coincidence rate P(x = y) among detected pairs."""
    x, y = series.detected_xy()
    n = x.size
    if n == 0:
        raise DataError(f"series {series.setting_id!r} has no detected coincidences")
    same = int(np.count_nonzero(x == y))
    p = same / n
    return p, float(np.sqrt(max(p * (1.0 - p), 1.0 / n) / n))


def _sweep_metric(metric: str, cfg: ExperimentConfig, manifest: RunManifest) -> Tuple[float, float]:
    runs = {sid: read_series(path) for sid, path in manifest.series_items()}
    if metric == "chsh":
        if len(cfg.settings) != 4:
            raise ParameterError("chsh metric needs exactly 4 settings in term order")
        report = chsh_from_series([runs[s.setting_id] for s in cfg.settings])
        return report.s_value, report.standard_error
    equal = [s for s in cfg.settings if s.a.dot(s.b) >= 1.0 - _PARALLEL_DOT_TOL]
    if not equal:
        raise ParameterError("gap metric needs a setting with equal analyzer directions")
    return _gap_from_series(runs[equal[0].setting_id])


def sweep(
    template: Dict[str, str],
    grid: Sequence[Tuple[str, Sequence[str]]],
    metric: str,
    out_dir: Optional[str] = None,
    master_seed: Optional[int] = None,
    parallelism: int = 1,
) -> SweepResult:
    """Simulate and analyze one run per grid point; write an aggregate CSV.

    Points are independent: each gets a seed derived from the master seed
    and its index, its own subdirectory, and is skipped when a manifest
    with the same config hash is already present (resume).  Failed points
    leave completed ones in place and are listed with empty metric cells.
    """
    if metric not in SWEEP_METRICS:
        raise ParameterError(f"metric must be one of {', '.join(SWEEP_METRICS)}, got {metric!r}")
    grid = [(key, list(values)) for key, values in grid]
    if not grid or any(not values for _, values in grid):
        raise ParameterError("sweep grid must be non-empty with at least one value per key")
    if master_seed is None:
        master_seed = int(template["seed"]) if "seed" in template else generate_seed()
    root = resolve_out_dir(out_dir, template.get("out"))
    os.makedirs(root, exist_ok=True)

    keys = [key for key, _ in grid]
    rows = []
    for index, combo in enumerate(itertools.product(*(values for _, values in grid))):
        overrides = tuple(zip(keys, combo))
        point_dir = os.path.join(root, f"point_{index:04d}")
        try:
            mapping = dict(template)
            mapping.pop("out", None)
            mapping.update(overrides)
            mapping["seed"] = str(_derive_point_seed(master_seed, index))
            cfg = ExperimentConfig.from_mapping(mapping, source=f"grid point {index}")
            manifest_path = os.path.join(point_dir, "manifest.txt")
            manifest = None
            if os.path.exists(manifest_path):
                existing = load_manifest(manifest_path)
                if existing.config_hash == cfg.config_hash():
                    manifest = existing
            if manifest is None:
                manifest = simulate(cfg, out_dir=point_dir, parallelism=parallelism)
            value, se = _sweep_metric(metric, cfg, manifest)
            rows.append(SweepRow(index, overrides, "ok", value, se))
        except (SpceLabError, OSError) as exc:
            rows.append(SweepRow(index, overrides, "failed", None, None, detail=str(exc)))

    lines = ["point," + ",".join(keys) + ",metric,value,standard_error,status"]
    for row in rows:
        cells = [str(row.index)] + [v for _, v in row.overrides] + [metric]
        if row.status == "ok":
            cells += [repr(float(row.value)), repr(float(row.standard_error)), "ok"]
        else:
            cells += ["", "", "failed"]
        lines.append(",".join(cells))
    csv_path = os.path.join(root, "sweep.csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    return SweepResult(metric=metric, master_seed=master_seed, rows=tuple(rows), csv_path=csv_path)
