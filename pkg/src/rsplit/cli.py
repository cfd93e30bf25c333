"""``simulate`` command-line entry point.

The config file is flat ``key = value`` text; every key can be overridden by
the matching flag. Exit codes: 0 success, 2 config error, 3 numeric error,
4 resource cap.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
from typing import Optional, Sequence

from .config import SystemConfig
from .errors import ConfigError, NotSaturatedError, NumericError, ResourceCapError
from .experiment import MODULATIONS, SweepSpec, parse_snr_range, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_RESOURCE = 0, 2, 3, 4

KNOWN_KEYS = {
    "n",
    "k",
    "m",
    "modulation",
    "pathloss_exponent",
    "snr_db",
    "snr_db_min",
    "snr_db_max",
    "snr_db_step",
    "radius",
    "min_radius",
    "distances",
    "csit",
    "tau",
    "pilot_power",
    "samples",
    "seed",
    "scheme",
    "t_mode",
    "t_value",
    "estimator",
    "workers",
    "u",
}
SCHEME_LABELS = {"rs-ci": "RS-CI", "rs-zf": "RS-ZF", "nors-ci": "NoRS-CI", "nors-zf": "NoRS-ZF"}

log = logging.getLogger(__name__)


def read_config_file(path: str) -> dict:
    """Parse a flat ``key = value`` file; ``#`` and ``;`` start comments."""
    parser = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    try:
        with open(path) as fh:
            parser.read_string("[simulate]\n" + fh.read(), source=path)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    values = dict(parser["simulate"])
    unknown = sorted(set(values) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {', '.join(unknown)}")
    return values


def _list(text: str) -> list:
    return [p.strip() for p in str(text).replace(";", ",").split(",") if p.strip()]


def parse_samples(text: str):
    """``"NC:NN"`` to ``(n_channel, n_noise)``."""
    try:
        nc, nn = (int(p) for p in str(text).split(":"))
    except ValueError as exc:
        raise ConfigError(f"samples must look like NC:NN, got {text!r}") from exc
    return nc, nn


def _modulation(name: str) -> int:
    key = str(name).strip().lower()
    if key.isdigit() and int(key) in MODULATIONS.values():
        return int(key)
    if key not in MODULATIONS:
        raise ConfigError(f"unknown modulation {name!r}; choose from {sorted(MODULATIONS)}")
    return MODULATIONS[key]


def _scheme(name: str) -> str:
    key = name.strip().lower()
    if key not in SCHEME_LABELS:
        raise ConfigError(f"unknown scheme {name!r}; choose from {sorted(SCHEME_LABELS)}")
    return SCHEME_LABELS[key]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simulate", description="RS / NoRS sum-rate sweeps over SNR.")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--snr-db", help="SNR grid as a:b:step (inclusive) or a comma list")
    p.add_argument("--scheme", action="append", help="rs-ci, rs-zf, nors-ci or nors-zf; repeatable")
    p.add_argument("--modulation", action="append", help="bpsk, qpsk or 8psk; repeatable")
    p.add_argument("--csit", choices=("perfect", "imperfect"))
    p.add_argument("--tau", type=float, help="training length")
    p.add_argument("--pilot-power", type=float)
    p.add_argument("--estimator", choices=("mc", "analytic", "both"))
    p.add_argument("--t-mode", choices=("fixed", "golden", "grid", "rate-match", "min-power"))
    p.add_argument("--t-value", help="power fraction(s) for fixed t-mode, comma separated")
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", help="NC:NN channel and noise sample counts")
    p.add_argument("--workers", type=int)
    p.add_argument("--N", dest="N", type=int, help="BS antennas")
    p.add_argument("--K", dest="K", type=int, help="users")
    p.add_argument("--distances", help="comma list of user distances, or 'random'")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def spec_from_args(args: argparse.Namespace) -> SweepSpec:
    """Merge the config file with CLI overrides; every problem is reported at once."""
    values = read_config_file(args.config) if args.config else {}
    problems = []

    def take(key, default=None, convert=str):
        raw = values.get(key, default)
        if raw is None:
            return None
        try:
            return convert(raw)
        except (ValueError, ConfigError) as exc:
            problems.append(f"{key}: {exc}")
            return None

    N = args.N if args.N is not None else take("n", 3, int)
    K = args.K if args.K is not None else take("k", 2, int)
    m_pl = take("pathloss_exponent", 2.7, float)
    R = take("radius", 40.0, float)
    R0 = take("min_radius", 1.0, float)
    csit = args.csit or take("csit", "perfect")
    tau = args.tau if args.tau is not None else take("tau", 10.0, float)
    pilot = args.pilot_power if args.pilot_power is not None else take("pilot_power", 1.0, float)
    seed = args.seed if args.seed is not None else take("seed", 0, int)
    workers = args.workers if args.workers is not None else take("workers", 1, int)
    estimator = args.estimator or take("estimator", "mc")
    t_mode = args.t_mode or take("t_mode", "fixed")

    dist_text = args.distances or values.get("distances", "1.0")
    if str(dist_text).strip().lower() == "random":
        distances = None
    else:
        try:
            distances = tuple(float(d) for d in _list(dist_text))
            if len(distances) == 1 and K:
                distances = distances * K
        except ValueError:
            problems.append(f"distances: cannot parse {dist_text!r}")
            distances = (1.0,)

    u = None
    if "u" in values:
        try:
            u = tuple(float(x) for x in _list(values["u"]))
        except ValueError:
            problems.append(f"u: cannot parse {values['u']!r}")

    if args.snr_db:
        snr_text = args.snr_db
    elif "snr_db" in values:
        snr_text = values["snr_db"]
    elif "snr_db_min" in values or "snr_db_max" in values:
        snr_text = f"{values.get('snr_db_min', 0)}:{values.get('snr_db_max', 30)}:{values.get('snr_db_step', 2)}"
    else:
        snr_text = "0:30:2"
    try:
        snr_grid = parse_snr_range(snr_text)
    except ConfigError as exc:
        problems.append(str(exc))
        snr_grid = []

    schemes = []
    for name in args.scheme or _list(values.get("scheme", "rs-ci,rs-zf,nors-ci,nors-zf")):
        try:
            schemes.append(_scheme(name))
        except ConfigError as exc:
            problems.append(str(exc))

    modulations = []
    mod_raw = args.modulation or _list(values.get("modulation", values.get("m", "qpsk")))
    for name in mod_raw:
        try:
            modulations.append(_modulation(name))
        except ConfigError as exc:
            problems.append(str(exc))

    t_text = args.t_value if args.t_value is not None else values.get("t_value", "1.0")
    try:
        t_values = [float(t) for t in _list(t_text)]
    except ValueError:
        problems.append(f"t_value: cannot parse {t_text!r}")
        t_values = []

    samples_text = args.samples or values.get("samples", "500:20")
    try:
        n_channel, n_noise = parse_samples(samples_text)
    except ConfigError as exc:
        problems.append(str(exc))
        n_channel, n_noise = 1, 1

    config = None
    try:
        config = SystemConfig(
            N=N,
            K=K,
            M=modulations[0] if modulations else 4,
            m_pl=m_pl,
            R0=R0,
            R=R,
            distances=distances,
            csit=csit,
            tau=tau,
            pilot_power=pilot,
            u=u,
        )
    except (ConfigError, TypeError) as exc:
        problems.append(str(exc))

    spec = None
    if config is not None:
        spec = SweepSpec(
            config=config,
            snr_grid=snr_grid,
            schemes=schemes,
            modulations=modulations,
            t_mode=t_mode,
            t_values=t_values,
            estimator=estimator,
            output_path=args.out,
            master_seed=seed,
            workers=workers if workers is not None else 1,
            n_channel=n_channel,
            n_noise=n_noise,
        )
        try:
            spec.validate()
        except ConfigError as exc:
            problems.append(str(exc))
    if problems:
        raise ConfigError("; ".join(problems))
    return spec


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        spec = spec_from_args(args)
        result = run_sweep(spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (NumericError, NotSaturatedError, FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("wrote %d rows to %s in %.1f s", len(result.rows), args.out, result.wall_time)
    print(f"{len(result.rows)} rows written to {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
