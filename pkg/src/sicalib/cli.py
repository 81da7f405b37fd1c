"""Command-line front end.

Exit codes: 0 success, 1 usage or validation error, 2 numerical,
calibration or resource failure.
"""

from __future__ import annotations

import argparse
import configparser
import math
import sys
from pathlib import Path

from . import __version__
from .calibration import (
    calib_lfsm,
    calib_stable_skewed,
    calibrate,
    fixed_eps_levy_limit,
    limit_law,
    probe_condition_ratios,
    LimitLaw,
    SamplingScales,
)
from .errors import ConfigurationError, DomainError, EstimationError, NumericalError, ResourceError
from .montecarlo import MCConfig, estimate_deviation_prob
from .persist import PROBE_COLUMNS, VERIFY_COLUMNS, sha256_file, write_csv, write_manifest
from .processes import BrownianMotion, Lfsm, StableLevy
from .risk import StationaryTailModel, quantile_sim, quantile_stationary, x_from_p
from .rng import MAX_SEED, fresh_seed
from .stable import StableParams

__all__ = ["main", "build_parser"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    text = text.strip()
    return [float(t) for t in text.split(",") if t.strip()] if text else []


def _open_prob(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return v


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v <= MAX_SEED:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


# (name, type, default) for options that a config file may also set
_PROCESS_OPTS = [
    ("process", str, None),
    ("alpha", float, None),
    ("beta", float, -1.0),
    ("sigma", float, 1.0),
    ("hurst", float, None),
    ("noise_scale", float, 1.0),
    ("var", float, 1.0),
]
_MC_OPTS = [
    ("n_paths", int, 10000),
    ("refine_m", int, 64),
    ("seed", _seed, None),
    ("ci_level", float, 0.95),
    ("threads", int, 1),
    ("path_cap", int, 2**24),
]
_VERIFY_OPTS = [("epsilon", _float_list, None), ("x", _float_list, [0.0]), ("mode", str, "one"), ("q", float, None)]
_PROBE_OPTS = [("epsilon", _float_list, None), ("x", _float_list, [0.0]), ("r", _float_list, [0.0])]


def _add_opts(p: argparse.ArgumentParser, opts):
    for name, _, _ in opts:
        p.add_argument("--" + name.replace("_", "-"), dest=name, default=None)


def _add_output(p: argparse.ArgumentParser):
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.add_argument("--config", help="flat key = value file; flags override it")


def _read_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise UsageError(f"malformed config file: {exc}") from exc
    return {k.replace("-", "_"): v for k, v in cp["run"].items()}


def _resolve(args, opts, config: dict) -> dict:
    known = {name for name, _, _ in opts}
    out = {}
    for key in config:
        if key not in known:
            raise UsageError(f"unknown config key {key!r}")
    for name, conv, default in opts:
        raw = getattr(args, name, None)
        if raw is None:
            raw = config.get(name)
        if raw is None:
            out[name] = default
            continue
        try:
            out[name] = conv(raw) if isinstance(raw, str) else raw
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"bad value for {name}: {raw!r} ({exc})") from exc
    return out


def _require(cfg: dict, *names):
    missing = [n for n in names if cfg.get(n) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _spec(cfg: dict):
    _require(cfg, "process")
    proc = cfg["process"]
    if proc == "bm":
        return BrownianMotion(cfg["var"])
    if proc == "stable":
        _require(cfg, "alpha")
        return StableLevy(StableParams(cfg["alpha"], cfg["beta"], cfg["sigma"]))
    if proc == "lfsm":
        _require(cfg, "alpha", "hurst")
        return Lfsm(cfg["alpha"], cfg["hurst"], cfg["noise_scale"])
    raise UsageError(f"--process must be bm, stable or lfsm, got {proc!r}")


def _mc_config(cfg: dict) -> MCConfig:
    return MCConfig(cfg["n_paths"], cfg["refine_m"], cfg["seed"], cfg["ci_level"], cfg["threads"], cfg["path_cap"])


def _prepare_out(out: str, names, force: bool) -> Path:
    d = Path(out)
    if d.exists() and not d.is_dir():
        raise UsageError(f"--out {out} exists and is not a directory")
    d.mkdir(parents=True, exist_ok=True)
    clash = [n for n in names if (d / n).exists()]
    if clash and not force:
        raise UsageError(f"refusing to overwrite {', '.join(clash)} in {out} (use --force)")
    return d


def _fmt(v: float) -> str:
    return f"{v:.5e}"


# --------------------------------------------------------------------------
# commands


def cmd_calibrate(args) -> int:
    eps = args.epsilon
    if args.process == "bm":
        i = args.sided
        scales = calibrate(BrownianMotion(args.var), eps, "one" if i == 1 else "two")
    elif args.process == "stable":
        if args.alpha is None:
            raise UsageError("--alpha is required for --process stable")
        scales = calib_stable_skewed(eps, args.alpha, args.sigma)
    else:
        if args.alpha is None or args.hurst is None:
            raise UsageError("--alpha and --hurst are required for --process lfsm")
        spec = Lfsm(args.alpha, args.hurst, args.noise_scale)
        scales = calib_lfsm(eps, spec.alpha, spec.H, spec.sigma1)
    print(f"epsilon = {_fmt(scales.epsilon)}")
    print(f"q = {_fmt(scales.q)}")
    print(f"w = {_fmt(scales.w)}" if math.isfinite(scales.w) else "w = unavailable")
    print(f"q_tilde = {_fmt(scales.q_tilde)}" if math.isfinite(scales.q_tilde) else "q_tilde = unavailable")
    print(f"eps_threshold = {_fmt(scales.eps_threshold)}")
    return 0


def _verify_limit(spec, x: float, mode: str, eps: float, q_fixed) -> float | None:
    if isinstance(spec, StableLevy) and q_fixed is not None:
        if x != 0.0:
            return None
        p = spec.params
        return fixed_eps_levy_limit(p.alpha, p.beta, eps / p.sigma, mode)
    try:
        law = limit_law(spec, mode)
        return law.probability(x) if law.kappa is not None and law.in_domain(x) else None
    except DomainError:
        return None


def cmd_verify(args) -> int:
    opts = _PROCESS_OPTS + _MC_OPTS + _VERIFY_OPTS
    cfg = _resolve(args, opts, _read_config(args.config))
    _require(cfg, "epsilon")
    if cfg["mode"] not in ("one", "two"):
        raise UsageError("--mode must be one or two")
    if cfg["seed"] is None:
        cfg["seed"] = fresh_seed()
    spec = _spec(cfg)
    mc = _mc_config(cfg)
    out = _prepare_out(args.out, ["verify.csv", "manifest.json"], args.force)
    rows = []
    for eps in cfg["epsilon"]:
        for x in cfg["x"]:
            est = estimate_deviation_prob(spec, eps, x, cfg["mode"], mc, q=cfg["q"])
            w = None if cfg["q"] is not None else calibrate(spec, eps, cfg["mode"]).w
            p_lim = _verify_limit(spec, x, cfg["mode"], eps, cfg["q"])
            rows.append(
                {
                    "process": cfg["process"],
                    "alpha": cfg["alpha"],
                    "beta": cfg["beta"] if cfg["process"] == "stable" else None,
                    "hurst": cfg["hurst"] if cfg["process"] == "lfsm" else None,
                    "epsilon": eps,
                    "x": x,
                    "q": est.q,
                    "w": w,
                    "mode": cfg["mode"],
                    "n_paths": mc.n_paths,
                    "refine_m": mc.refine_m,
                    "k": est.k,
                    "p_hat": est.p_hat,
                    "ci_lo": est.ci_lo,
                    "ci_hi": est.ci_hi,
                    "p_limit": p_lim,
                    "gap": None if p_lim is None else est.p_hat - p_lim,
                    "bias_note": est.bias_note,
                    "seed": mc.seed,
                }
            )
    csv_path = out / "verify.csv"
    write_csv(csv_path, VERIFY_COLUMNS, rows)
    write_manifest(
        out / "manifest.json", "verify", cfg, mc.seed, __version__,
        [{"file": csv_path.name, "sha256": sha256_file(csv_path), "rows": len(rows)}],
    )
    print(f"wrote {len(rows)} rows to {csv_path}")
    return 0


def cmd_probe(args) -> int:
    opts = _PROCESS_OPTS + _PROBE_OPTS
    cfg = _resolve(args, opts, _read_config(args.config))
    _require(cfg, "epsilon")
    spec = _spec(cfg)
    if isinstance(spec, BrownianMotion):
        raise UsageError("probe needs --process stable or lfsm")
    out = _prepare_out(args.out, ["probe.csv", "manifest.json"], args.force)
    rows = []
    for eps in cfg["epsilon"]:
        for x in cfg["x"]:
            for r in cfg["r"]:
                pr = probe_condition_ratios(spec, eps, x, r)
                rows.append(
                    {
                        "process": cfg["process"], "epsilon": eps, "x": x, "r": r,
                        "ratio31": pr.ratio31, "ratio32": pr.ratio32, "ratio33": pr.ratio33,
                        "target31": pr.target31, "target32": pr.target32, "target33": pr.target33,
                    }
                )
    csv_path = out / "probe.csv"
    write_csv(csv_path, PROBE_COLUMNS, rows)
    write_manifest(
        out / "manifest.json", "probe", cfg, None, __version__,
        [{"file": csv_path.name, "sha256": sha256_file(csv_path), "rows": len(rows)}],
    )
    print(f"wrote {len(rows)} rows to {csv_path}")
    return 0


def _read_table(path: str):
    us, tails = [], []
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read table: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line or line.replace(" ", "") == "u,tail":
            continue
        parts = [s.strip() for s in line.split(",")]
        try:
            u, t = map(float, parts)
        except ValueError as exc:
            raise UsageError(f"{path}:{n}: expected 'u,tail', got {line!r}") from exc
        us.append(u)
        tails.append(t)
    return us, tails


def cmd_quantile(args) -> int:
    if args.variant == "sim":
        cfg = _resolve(args, _PROCESS_OPTS + _MC_OPTS, _read_config(getattr(args, "config", None)))
        if cfg["seed"] is None:
            cfg["seed"] = fresh_seed()
        spec = _spec(cfg)
        mc = _mc_config(cfg)
        x = args.x
        if x is None:
            if args.kappa is None:
                raise UsageError("pass --x or --kappa")
            x = x_from_p(args.p, LimitLaw(args.kappa))
        res = quantile_sim(spec, args.p, args.epsilon, x, mc)
        print(f"u = {res.u!r}")
        print(f"d = {res.d!r}")
        print(f"p = {res.p!r}")
        print(f"q = {res.q!r}")
        print(f"seed = {mc.seed}")
        print(f"mc_interval = [{res.coverage_lo!r}, {res.coverage_hi!r}] ({res.exceed}/{res.n} exceedances)")
        print(res.certificate)
        return 0
    try:
        us, tails = _read_table(args.table)
        model = StationaryTailModel.from_table(us, tails)
    except ConfigurationError as exc:
        raise UsageError(str(exc)) from exc
    scales = SamplingScales(args.epsilon, args.q, args.w if args.w is not None else math.nan, math.nan, math.nan)
    law = LimitLaw(args.kappa) if args.kappa is not None else None
    if args.x is None and law is None:
        raise UsageError("pass --x or --kappa")
    res = quantile_stationary(model, args.p, args.epsilon, scales, law=law, x=args.x)
    print(f"u = {res.u!r}")
    print(f"y = {res.y!r}")
    print(f"d = {res.d!r}")
    print(f"p = {res.p!r}")
    print(f"residual = {res.residual!r}")
    print(res.certificate)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sicalib", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("calibrate", help="print q, w, q_tilde and the admissible-epsilon threshold")
    p.add_argument("--process", required=True, choices=["bm", "stable", "lfsm"])
    p.add_argument("--epsilon", required=True, type=float)
    p.add_argument("--var", type=float, default=1.0)
    p.add_argument("--sided", type=int, choices=[1, 2], default=1)
    p.add_argument("--alpha", type=float)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--hurst", type=float)
    p.add_argument("--noise-scale", type=float, default=1.0)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("verify", help="Monte Carlo deviation probabilities to CSV")
    _add_opts(p, _PROCESS_OPTS + _MC_OPTS + _VERIFY_OPTS)
    _add_output(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("probe", help="calibration tail-ratio probes to CSV")
    _add_opts(p, _PROCESS_OPTS + _PROBE_OPTS)
    _add_output(p)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("quantile", help="high-quantile certificates")
    qsub = p.add_subparsers(dest="variant", required=True, parser_class=_Parser)
    qs = qsub.add_parser("sim", help="simulation on the sampling grid")
    _add_opts(qs, _PROCESS_OPTS + _MC_OPTS)
    qs.add_argument("--config")
    qt = qsub.add_parser("stationary", help="stationary tail-model calculator")
    qt.add_argument("--table", required=True, help="two-column 'u,tail' file, '#' comments")
    qt.add_argument("--q", required=True, type=float)
    qt.add_argument("--w", type=float)
    for sp in (qs, qt):
        sp.add_argument("--p", required=True, type=_open_prob)
        sp.add_argument("--epsilon", required=True, type=float)
        sp.add_argument("--x", type=float)
        sp.add_argument("--kappa", type=float)
    p.set_defaults(func=cmd_quantile)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DomainError, NumericalError, ResourceError, EstimationError) as exc:
        threshold = getattr(exc, "threshold", None)
        print(f"error: {exc}", file=sys.stderr)
        if threshold is not None:
            print(f"minimal admissible epsilon: below {threshold!r}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
