"""SNR sweeps over schemes and estimators, with CSV and SVG output."""

from __future__ import annotations

import csv
import io
import math
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import SystemConfig, derive_power_split
from .errors import ConfigError
from .power import golden_section_t, grid_search_t, min_power_saturation, rate_matching_t, sum_rate_function
from .rate_mc import McEstimatorSettings, RatePoint, parse_scheme, rs_sum_rate_mc

CSV_COLUMNS = (
    "snr_db",
    "scheme",
    "estimator",
    "csit",
    "modulation",
    "N",
    "K",
    "t",
    "rate_common_min",
    "rate_private_sum",
    "sum_rate",
    "ci_halfwidth",
    "n_channel",
    "n_noise",
    "seed",
    "build",
)
T_MODES = ("fixed", "golden", "grid", "rate-match", "min-power")
ESTIMATOR_MODES = ("mc", "analytic", "both")
MODULATIONS = {"bpsk": 2, "qpsk": 4, "8psk": 8}
MODULATION_NAMES = {v: k for k, v in MODULATIONS.items()}


@dataclass
class SweepSpec:
    """Everything that defines a sweep; ``(spec, master_seed)`` fixes the output."""

    config: SystemConfig
    snr_grid: Sequence[float]
    schemes: Sequence[str]
    modulations: Sequence[int] = (4,)
    t_mode: str = "fixed"
    t_values: Sequence[float] = (1.0,)
    estimator: str = "mc"
    output_path: Optional[str] = None
    master_seed: int = 0
    workers: int = 1
    n_channel: int = 500
    n_noise: int = 20
    grid_points: int = 21
    golden_tol: float = 1e-2

    def validate(self) -> None:
        """Check the whole spec and report every problem at once."""
        problems = []
        if len(self.snr_grid) == 0:
            problems.append("SNR grid is empty")
        if len(self.schemes) == 0:
            problems.append("no schemes selected")
        for s in self.schemes:
            try:
                parse_scheme(s)
            except ConfigError as exc:
                problems.append(str(exc))
        for m in self.modulations:
            if m not in MODULATION_NAMES:
                problems.append(f"unsupported modulation order {m}")
        if self.t_mode not in T_MODES:
            problems.append(f"t-mode must be one of {T_MODES}")
        if self.t_mode == "fixed":
            if len(self.t_values) == 0:
                problems.append("fixed t-mode needs at least one t value")
            problems.extend(f"t value {t} outside [0, 1]" for t in self.t_values if not 0.0 <= t <= 1.0)
        if self.estimator not in ESTIMATOR_MODES:
            problems.append(f"estimator must be one of {ESTIMATOR_MODES}")
        if self.estimator in ("analytic", "both"):
            if self.config.csit == "perfect" and self.config.random_users:
                problems.append("analytic rates with perfect CSIT need fixed user distances")
        if self.n_channel < 1 or self.n_noise < 1:
            problems.append("sample counts must be positive")
        if self.workers < 1:
            problems.append("workers must be at least 1")
        if problems:
            raise ConfigError("; ".join(problems))

    def settings(self) -> McEstimatorSettings:
        return McEstimatorSettings(
            n_channel=self.n_channel, n_noise=self.n_noise, seed=self.master_seed, workers=self.workers
        )


@dataclass
class SweepRow:
    """One CSV row: a rate point plus its provenance."""

    point: RatePoint
    estimator: str
    modulation: str
    N: int
    K: int
    seed: int
    build: str

    def as_record(self) -> dict:
        p = self.point
        return {
            "snr_db": p.snr_db,
            "scheme": p.scheme,
            "estimator": self.estimator,
            "csit": p.csit,
            "modulation": self.modulation,
            "N": self.N,
            "K": self.K,
            "t": p.t,
            "rate_common_min": min(p.common_rates) if p.scheme.startswith("RS") else 0.0,
            "rate_private_sum": math.fsum(p.private_rates),
            "sum_rate": p.sum_rate,
            "ci_halfwidth": p.ci_halfwidth,
            "n_channel": p.samples,
            "n_noise": p.n_noise,
            "seed": self.seed,
            "build": self.build,
        }


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)
    wall_time: float = 0.0

    def records(self) -> list:
        return [r.as_record() if isinstance(r, SweepRow) else dict(r) for r in self.rows]


def build_tag() -> str:
    """``v<version>`` plus the short git description of the source tree when available."""
    tag = f"v{__version__}"
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            tag += "-" + out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return tag


def _analytic_point(scheme: str, config: SystemConfig, t: float) -> RatePoint:
    from .analytic.rates import analytic_rates, largeN_rates_imperfect

    rs, kind = parse_scheme(scheme)
    t_eff = t if rs else 1.0
    split = derive_power_split(config.P, t_eff, config.K)
    if config.csit == "imperfect":
        per_user = [largeN_rates_imperfect(k, scheme, config, split) for k in range(config.K)]
        common = [u[0] for u in per_user] if rs else [0.0] * config.K
        private = [u[1] for u in per_user] if rs else [u[2] for u in per_user]
    else:
        common, private = analytic_rates(scheme, config, split)
    total = (min(common) if rs else 0.0) + math.fsum(private)
    return RatePoint(
        snr_db=config.snr_db,
        t=t_eff,
        common_rates=list(map(float, common)),
        private_rates=list(map(float, private)),
        sum_rate=float(total),
        ci_halfwidth=float("nan"),
        samples=0,
        scheme=("RS-" if rs else "NoRS-") + kind,
        csit=config.csit,
        n_noise=0,
    )


def _split_values(spec: SweepSpec, scheme: str, config: SystemConfig, estimator: str, settings, saturation_t):
    """Power fractions to evaluate for one (scheme, SNR) cell."""
    rs, _ = parse_scheme(scheme)
    if not rs:
        return [1.0]
    if spec.t_mode == "fixed":
        return list(spec.t_values)
    if spec.t_mode == "grid":
        return [grid_search_t(sum_rate_function(scheme, config, settings, estimator), spec.grid_points).t_star]
    if spec.t_mode == "golden":
        return [golden_section_t(sum_rate_function(scheme, config, settings, estimator), spec.golden_tol).t_star]
    if spec.t_mode == "rate-match":
        return [rate_matching_t(config, scheme, settings, estimator=estimator).t_star]
    return [saturation_t]


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Evaluate every (modulation, scheme, estimator, SNR) cell of the sweep.

    The Monte-Carlo and analytic rows are computed at the same power split;
    all Monte-Carlo evaluations share one channel stream per channel index.
    """
    spec.validate()
    start = time.perf_counter()
    settings = spec.settings()
    build = build_tag()
    estimators = ["mc", "analytic"] if spec.estimator == "both" else [spec.estimator]
    rows = []
    for M in spec.modulations:
        base = spec.config.replace(M=int(M))
        for scheme in spec.schemes:
            rs, _ = parse_scheme(scheme)
            saturation_t = None
            if rs and spec.t_mode == "min-power":
                saturation_t = min_power_saturation(base, scheme, settings, estimator=estimators[0]).t_star
            for snr in sorted(float(s) for s in spec.snr_grid):
                cfg = base.with_snr_db(snr)
                ts = _split_values(spec, scheme, cfg, estimators[0], settings, saturation_t)
                for estimator in estimators:
                    for t in ts:
                        if estimator == "mc":
                            split = derive_power_split(cfg.P, t, cfg.K)
                            point = rs_sum_rate_mc(scheme, cfg, split, settings)
                        else:
                            point = _analytic_point(scheme, cfg, t)
                        point.snr_db = snr
                        rows.append(
                            SweepRow(point, estimator, MODULATION_NAMES[int(M)], cfg.N, cfg.K, spec.master_seed, build)
                        )
    rows.sort(key=lambda r: (r.modulation, r.point.scheme, r.estimator, r.point.t if spec.t_mode == "fixed" else 0.0, r.point.snr_db))
    result = SweepResult(rows=rows, wall_time=time.perf_counter() - start)
    if spec.output_path is not None:
        out = Path(spec.output_path)
        out.mkdir(parents=True, exist_ok=True)
        emit_csv(result, out / "results.csv")
        emit_plot(result, out / "sum_rate.svg")
    return result


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_csv(result: SweepResult, path) -> Path:
    """Write the rows with the fixed column order; floats use full ``repr`` precision."""
    path = Path(path)
    records = result.records()
    if not records:
        raise ConfigError("refusing to write an empty sweep result")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow([_fmt(rec[c]) for c in CSV_COLUMNS])
    try:
        path.write_text(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc
    return path


_INT_COLUMNS = {"N", "K", "n_channel", "n_noise", "seed"}
_STR_COLUMNS = {"scheme", "estimator", "csit", "modulation", "build"}


def read_csv(path) -> list:
    """Parse a CSV written by :func:`emit_csv` back into typed records."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ConfigError(f"{path}: unexpected header {reader.fieldnames}")
        out = []
        for row in reader:
            rec = {}
            for k, v in row.items():
                if k in _INT_COLUMNS:
                    rec[k] = int(v)
                elif k in _STR_COLUMNS:
                    rec[k] = v
                else:
                    rec[k] = float(v)
            out.append(rec)
    return out


def emit_plot(result: SweepResult, path) -> Path:
    """Static SVG of sum rate versus SNR, one line per (modulation, scheme, estimator, t)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    records = result.records()
    if not records:
        raise ConfigError("nothing to plot")
    curves = {}
    for rec in records:
        label = f"{rec['modulation'].upper()} {rec['scheme']} ({rec['estimator']})"
        if len({r["t"] for r in records if r["scheme"] == rec["scheme"]}) > 1 and rec["scheme"].startswith("RS"):
            label += f" t={rec['t']:g}"
        curves.setdefault(label, []).append((rec["snr_db"], rec["sum_rate"]))
    plt.rcParams["svg.hashsalt"] = "rsplit"
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for label, pts in curves.items():
        pts.sort()
        x, y = zip(*pts)
        ax.plot(x, y, marker="o", markersize=3, label=label, linestyle="--" if "analytic" in label else "-")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("Sum rate (bits/s/Hz)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise OSError(f"cannot write plot to {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path


def parse_snr_range(text: str) -> list:
    """``"a:b:step"`` (inclusive) or a comma list to a list of dB values."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) == 2:
                parts.append(1.0)
            a, b, step = parts
            if step <= 0 or b < a:
                raise ConfigError(f"bad SNR range {text!r}")
            n = int(math.floor((b - a) / step + 1e-9)) + 1
            return [round(a + i * step, 10) for i in range(n)]
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad SNR specification {text!r}") from exc
