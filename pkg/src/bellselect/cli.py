"""Command-line entry point.

Subcommands::

    bellselect run --config run.json [--seed N] [--trials N] [--out DIR] [--gates] [--workers N]
    bellselect oracle --label C0 --a 0 --b pi/4
    bellselect combos --geometry MFuture --grid 0,0 --grid 0,pi/2
    bellselect gallery coin_factory [--config params.json] [--seed N] [--out DIR] [--gates]

Exit codes: 0 success, 2 configuration error, 3 acceptance-gate failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import re
import secrets
import sys
import tempfile
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import jsonschema
import numpy as np

from . import __version__, gallery
from . import protocols as pr
from . import quantum as qc
from . import stats as st
from .quantum import BellLabel

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_GATES = 0, 2, 3
CSV_HEADER = "trial,protocol,prep,m,a,b,A,B,kept,hopper"
REPORTS = ("chsh", "fact", "msm", "screening", "oracle-compare")
GALLERY = ("survivorship", "coin_factory", "clinic", "digit_parity")
TSIRELSON = 2.0 * math.sqrt(2.0)

_ANGLE = {"oneOf": [{"type": "number"}, {"type": "string"}]}
CONFIG_SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "protocol"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "protocol": {"enum": list(pr.PROTOCOLS) + list(GALLERY)},
        "label": {"type": "string"},
        "geometry": {"enum": [g.value for g in pr.Geometry]},
        "settings": {
            "type": "object",
            "additionalProperties": False,
            "required": ["a", "b"],
            "properties": {
                "a": {"type": "array", "minItems": 1, "items": _ANGLE},
                "b": {"type": "array", "minItems": 1, "items": _ANGLE},
                "weights": {"type": "array", "items": {"type": "array", "items": {"type": "number", "minimum": 0}}},
            },
        },
        "trials": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "workers": {"type": "integer", "minimum": 1},
        "reports": {"type": "array", "items": {"enum": list(REPORTS)}, "uniqueItems": True},
        "gallery": {"type": "object"},
    },
}

GALLERY_PARAMS = {
    "survivorship": gallery.SurvivorshipConfig,
    "coin_factory": gallery.CoinFactoryConfig,
    "clinic": gallery.ClinicConfig,
    "digit_parity": None,
}


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending key."""


_PI_EXPR = re.compile(
    r"^\s*(?P<sign>[+-]?)\s*(?P<coef>\d+(?:\.\d*)?|\.\d+)?\s*\*?\s*pi\s*(?:/\s*(?P<den>\d+(?:\.\d*)?))?\s*$"
)


def parse_angle(value: "float | int | str") -> float:
    """Radians from a number or an expression such as ``"3pi/4"`` or ``"-pi/2"``."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    text = str(value).strip().lower()
    m = _PI_EXPR.match(text)
    if m:
        coef = float(m["coef"]) if m["coef"] else 1.0
        den = float(m["den"]) if m["den"] else 1.0
        if den == 0:
            raise ValueError(f"bad angle {value!r}")
        return (-1.0 if m["sign"] == "-" else 1.0) * coef * math.pi / den
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"bad angle {value!r}; use radians or forms like 3pi/4") from None


def _key_path(error: jsonschema.ValidationError) -> str:
    path = ".".join(str(p) for p in error.absolute_path)
    if error.validator == "additionalProperties":
        extra = sorted(set(error.instance) - set(error.schema.get("properties", {})))
        return ".".join(filter(None, [path, ",".join(extra)]))
    if error.validator == "required":
        missing = [k for k in error.validator_value if k not in error.instance]
        return ".".join(filter(None, [path, ",".join(missing)]))
    return path or "<root>"


def validate_config(raw: Any) -> dict[str, Any]:
    """Schema check plus semantic checks; returns a normalized copy."""
    validator = jsonschema.Draft7Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(f"config key '{_key_path(e)}': {e.message}")
    cfg = json.loads(json.dumps(raw))
    proto = cfg["protocol"]
    if proto in GALLERY:
        for key in ("label", "geometry", "settings", "reports"):
            if key in cfg:
                raise ConfigError(f"config key '{key}': not used by gallery example {proto!r}")
        params = cfg.get("gallery", {})
        try:
            _gallery_params(proto, params, 0)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key 'gallery': {exc}") from None
        return cfg
    if "gallery" in cfg:
        raise ConfigError("config key 'gallery': only valid for gallery examples")
    if proto == pr.V_FIXED:
        if "label" not in cfg:
            raise ConfigError("config key 'label': required for v_fixed")
        try:
            cfg["label"] = str(BellLabel.parse(cfg["label"]))
        except ValueError as exc:
            raise ConfigError(f"config key 'label': {exc}") from None
    elif "label" in cfg:
        raise ConfigError(f"config key 'label': only valid for v_fixed, not {proto}")
    if proto == pr.W_SWAP:
        cfg.setdefault("geometry", pr.Geometry.M_FUTURE.value)
    elif "geometry" in cfg:
        raise ConfigError(f"config key 'geometry': only valid for w_swap, not {proto}")
    try:
        strategy = strategy_from_config(cfg)
    except ValueError as exc:
        raise ConfigError(f"config key 'settings': {exc}") from None
    if proto in (pr.CHARLIE, pr.HOPPER):
        try:
            pr._check_two_by_two(strategy)
        except ValueError as exc:
            raise ConfigError(f"config key 'settings': {exc}") from None
    return cfg


def strategy_from_config(cfg: dict[str, Any]) -> pr.SettingStrategy:
    s = cfg.get("settings")
    if s is None:
        return pr.CHSH_STRATEGY
    a = [parse_angle(x) for x in s["a"]]
    b = [parse_angle(x) for x in s["b"]]
    return pr.SettingStrategy(tuple(a), tuple(b), s.get("weights"))


def _gallery_params(name: str, params: dict[str, Any], seed: int):
    if name == "digit_parity":
        allowed = {"source_a", "source_b", "n"}
        extra = set(params) - allowed
        if extra:
            raise ValueError(f"unknown parameter(s) {sorted(extra)}")
        src_a = gallery.DigitStreamSource(**{"kind": gallery.SYNTHETIC, "seed": seed, **params.get("source_a", {})})
        src_b = gallery.DigitStreamSource(
            **{"kind": gallery.SYNTHETIC, "seed": (seed + 1) % 2**64, **params.get("source_b", {})}
        )
        n = int(params.get("n", 100_000))
        if n < 1:
            raise ValueError("n must be >= 1")
        return src_a, src_b, n
    cls = GALLERY_PARAMS[name]
    names = {f.name for f in dataclasses.fields(cls)} - {"seed"}
    extra = set(params) - names
    if extra:
        raise ValueError(f"unknown parameter(s) {sorted(extra)}")
    kwargs = dict(params)
    if "lethal" in kwargs:
        kwargs["lethal"] = frozenset(kwargs["lethal"])
    return cls(**kwargs, seed=seed)


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, BellLabel):
        return str(obj)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj) if f.repr}
    if isinstance(obj, dict):
        return {_key(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted(_jsonable(v) for v in obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _key(k: Any) -> str:
    if isinstance(k, tuple):
        return "|".join(_key(x) for x in k)
    if isinstance(k, float):
        return f"{k:.12g}"
    return str(k)


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def events_csv(ensemble: pr.Ensemble) -> str:
    """The event log; angles in radians to 12 significant digits, absent fields empty."""
    a_str = [_fmt(x) for x in ensemble.a_choices]
    b_str = [_fmt(x) for x in ensemble.b_choices]
    lab = ["C0", "C1", "C2", "C3", ""]  # index -1 -> ""
    hop = ["0", "1", "2", "3", ""]
    proto = ensemble.protocol
    rows = [CSV_HEADER]
    rows.extend(
        f"{t},{proto},{lab[p]},{lab[m]},{a_str[ai]},{b_str[bi]},{A},{B},{int(k)},{hop[h]}"
        for t, p, m, ai, bi, A, B, k, h in zip(
            ensemble.trial.tolist(),
            ensemble.prep.tolist(),
            ensemble.m.tolist(),
            ensemble.a_idx.tolist(),
            ensemble.b_idx.tolist(),
            ensemble.A.tolist(),
            ensemble.B.tolist(),
            ensemble.kept.tolist(),
            ensemble.hopper.tolist(),
        )
    )
    return "\n".join(rows) + "\n"


def run_protocol(cfg: dict[str, Any], seed: int, trials: int, workers: int = 1) -> pr.Ensemble:
    strategy = strategy_from_config(cfg)
    proto = cfg["protocol"]
    kw = dict(trials=trials, seed=seed, workers=workers)
    if proto == pr.V_FIXED:
        return pr.run_v_fixed(cfg["label"], strategy, **kw)
    if proto == pr.V_RANDOM:
        return pr.run_v_random(strategy, **kw)
    if proto == pr.W_SWAP:
        return pr.run_w_swap(cfg["geometry"], strategy, **kw)
    if proto == pr.CHARLIE:
        return pr.run_classical_charlie(strategy, **kw)
    return pr.run_hopper_sort(strategy, **kw)


def _chsh_pairs(strategy: pr.SettingStrategy) -> tuple | None:
    available = set(strategy.pairs)
    want = [tuple(qc.normalize_angle(x) for x in p) for p in pr.CHSH_PAIRS]
    return tuple(want) if all(p in available for p in want) else None


def _equal_pair(strategy: pr.SettingStrategy):
    for a, b in strategy.pairs:
        if a == b:
            return (a, b)
    return strategy.pairs[0]


def protocol_reports(ens: pr.Ensemble, wanted: Sequence[str]) -> tuple[dict[str, Any], dict[str, bool]]:
    """Reports for one ensemble plus the pass/fail of each applicable gate."""
    proto = ens.protocol
    strategy = ens.strategy
    chsh_pairs = _chsh_pairs(strategy)
    strat_col = {pr.V_FIXED: "prep", pr.V_RANDOM: "prep", pr.W_SWAP: "m", pr.HOPPER: "hopper"}.get(proto)
    full = st.tabulate(ens)
    if proto == pr.CHARLIE:
        selected = st.tabulate(ens, where=ens.kept)
        strata = None
    else:
        selected = full
        strata = st.tabulate(ens, by=strat_col)
    reports: dict[str, Any] = {}
    gates: dict[str, bool] = {}

    super_corr = {pr_: st.corr(full, pr_) for pr_ in full.pairs}
    reports["super_correlations"] = super_corr
    if proto in (pr.V_RANDOM, pr.W_SWAP, pr.CHARLIE):
        gates["super_null"] = all(not c.significant() for c in super_corr.values())
    if proto == pr.CHARLIE:
        rate = float(ens.kept.mean())
        se = math.sqrt(0.25 * 0.75 / len(ens))
        reports["keep_rate"] = {"value": rate, "stderr": se, "expected": 0.25}
        gates["keep_rate"] = abs(rate - 0.25) <= st.GATE_SIGMAS * se
    if proto == pr.HOPPER:
        reports["discarded"] = int((~ens.kept).sum())
        gates["no_discards"] = reports["discarded"] == 0
    if strat_col in ("m", "prep") and proto != pr.V_FIXED:
        freq = np.bincount(getattr(ens, strat_col), minlength=4) / len(ens)
        se = math.sqrt(0.25 * 0.75 / len(ens))
        reports["label_frequencies"] = {str(BellLabel(i)): float(f) for i, f in enumerate(freq)}
        gates["label_frequencies"] = bool(np.all(np.abs(freq - 0.25) <= st.GATE_SIGMAS * se))

    def labelled(lab):
        return BellLabel(int(lab))

    if "chsh" in wanted and chsh_pairs is not None:
        out: dict[str, Any] = {}
        if proto == pr.CHARLIE:
            out["kept"] = st.chsh(selected, chsh_pairs, analytic=BellLabel.C0)
        elif proto == pr.V_FIXED:
            out["all"] = st.chsh(full, chsh_pairs, analytic=ens.config["label"])
        else:
            out["all"] = st.chsh(full, chsh_pairs)
            for lab in strata.labels:
                out[str(labelled(lab))] = st.chsh(strata, chsh_pairs, label=lab, analytic=labelled(lab))
        reports["chsh"] = out
        checked = [r for r in out.values() if r.analytic_S is not None]
        gates["chsh"] = all(r.within(r.analytic_S) for r in checked)
        gates["tsirelson"] = all(
            r.missing or abs(r.S) <= TSIRELSON + st.GATE_SIGMAS * r.stderr for r in out.values()
        )
    if "oracle-compare" in wanted:
        if proto == pr.CHARLIE:
            cmp_ = st.compare_to_analytic(selected, BellLabel.C0)
        elif proto == pr.V_FIXED:
            cmp_ = st.compare_to_analytic(full, ens.config["label"])
        else:
            cmp_ = st.compare_to_analytic(strata)
        reports["oracle_compare"] = cmp_
        gates["oracle"] = cmp_.passed()
    if "fact" in wanted:
        if proto == pr.CHARLIE:
            reports["fact"] = st.fact_deviation(selected, qc.bell_state(BellLabel.C0))
        else:
            analytic = {lab: qc.bell_state(labelled(lab)) for lab in strata.labels}
            reports["fact"] = st.fact_deviation(strata, analytic)
    if "msm" in wanted:
        pair = _equal_pair(strategy)
        if proto == pr.CHARLIE:
            reports["msm"] = st.msm_delta(full, selected, pair)
        elif proto == pr.V_FIXED:
            reports["msm"] = st.msm_delta(full, full, pair)
        else:
            reports["msm"] = {
                str(labelled(lab)): st.msm_delta(full, strata, pair, sub_label=lab) for lab in strata.labels
            }
    if "screening" in wanted and strat_col is not None:
        reports["screening"] = st.screening_off(ens, strat_col)
    return reports, gates


def gallery_reports(name: str, params: dict[str, Any], seed: int) -> tuple[dict[str, Any], dict[str, bool], str]:
    """Run one gallery example; returns reports, gates and a small CSV table."""
    cfg = _gallery_params(name, params, seed)
    gates: dict[str, bool] = {}
    if name == "survivorship":
        rep = gallery.survivorship(cfg)
        gates["lethal_survivor_hits_zero"] = rep.lethal_survivor_hits == 0
        gates["super_uniform"] = rep.super_uniform
        lines = ["region,lethal,hits,survivor_hits"] + [
            f"{i},{int(i in cfg.lethal)},{h},{s}" for i, (h, s) in enumerate(zip(rep.hit_counts, rep.survivor_counts))
        ]
        return {"survivorship": rep}, gates, "\n".join(lines) + "\n"
    if name == "coin_factory":
        ens = gallery.coin_factory(cfg)
        rep = gallery.coin_factory_report(ens)
        gates["overall_matches"] = rep.overall_matches
        gates["coin_type_screens_off"] = rep.by_coin_type.screens_off
        lines = ["coin,shift,setting,coin_type,A,B"] + [
            f"{i},{s},{st_},{ct},{a},{b}"
            for i, (s, st_, ct, a, b) in enumerate(
                zip(ens.shift.tolist(), ens.setting.tolist(), ens.coin_type.tolist(), ens.A.tolist(), ens.B.tolist())
            )
        ]
        return {"coin_factory": rep}, gates, "\n".join(lines) + "\n"
    if name == "clinic":
        rep = gallery.clinic(cfg)
        gates["restricted_null"] = not rep.degenerate and not rep.restricted_phi.significant()
        gates["full_positive"] = rep.full_phi.value > st.GATE_SIGMAS * rep.full_phi.stderr
        lines = ["table,disease_a,disease_b,count"]
        for tname, cells in (("full", rep.full_cells), ("restricted", rep.restricted_cells)):
            for i in range(2):
                for j in range(2):
                    lines.append(f"{tname},{int(i == 0)},{int(j == 0)},{int(cells[i, j])}")
        return {"clinic": rep}, gates, "\n".join(lines) + "\n"
    src_a, src_b, n = cfg
    rep = gallery.digit_parity(src_a, src_b, n)
    gates["odd_odd_within_s_zero"] = rep.odd_odd_within_s == 0
    if src_a.kind == gallery.SYNTHETIC and src_b.kind == gallery.SYNTHETIC:
        gates["within_s_phi"] = rep.phi_within_s.within(-0.5)
    lines = ["table,a_odd,b_odd,count"]
    for tname, cells in (("full", rep.cells), ("within_s", rep.within_s)):
        for i in range(2):
            for j in range(2):
                lines.append(f"{tname},{int(i == 0)},{int(j == 0)},{int(cells[i, j])}")
    return {"digit_parity": rep, "sources": [src_a, src_b]}, gates, "\n".join(lines) + "\n"


def _load_config(path: str) -> dict[str, Any]:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return raw


def _resolve_seed(cfg: dict[str, Any], override: int | None) -> int:
    if override is not None:
        if not 0 <= override < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        return override
    if "seed" in cfg:
        return int(cfg["seed"])
    seed = secrets.randbits(64)
    print(f"*** no seed given: using generated seed {seed} (echoed in summary.json) ***", file=sys.stderr)
    return seed


def execute(cfg: dict[str, Any], out: Path, gates_on: bool, workers: int | None = None) -> int:
    """Run a validated, fully resolved config and write its outputs."""
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    proto = cfg["protocol"]
    summary: dict[str, Any] = {"tool": "bellselect", "version": __version__, "config": cfg}
    if proto in GALLERY:
        reports, gates, table = gallery_reports(proto, cfg.get("gallery", {}), cfg["seed"])
        files = {f"{proto}.csv": table}
    else:
        ens = run_protocol(cfg, cfg["seed"], cfg["trials"], workers or cfg.get("workers", 1))
        reports, gates = protocol_reports(ens, cfg.get("reports", REPORTS))
        files = {"events.csv": events_csv(ens)}
    summary["reports"] = reports
    summary["gates"] = {"enabled": gates_on, "results": gates, "passed": all(gates.values())}
    summary["started_at"] = started.isoformat()
    summary["wall_clock_seconds"] = time.perf_counter() - t0
    for name, text in files.items():
        write_atomic(out / name, text)
    write_atomic(out / "summary.json", json.dumps(_jsonable(summary), indent=2, allow_nan=False) + "\n")
    failed = [k for k, v in gates.items() if not v]
    if gates_on and failed:
        print(f"acceptance gates failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_GATES
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    if not args.config:
        raise ConfigError("run needs --config PATH")
    cfg = validate_config(_load_config(args.config))
    return _run_resolved(cfg, args)


def _run_resolved(cfg: dict[str, Any], args: argparse.Namespace) -> int:
    cfg["seed"] = _resolve_seed(cfg, args.seed)
    if cfg["protocol"] not in GALLERY:
        if args.trials is not None:
            if args.trials < 1:
                raise ConfigError("--trials must be >= 1")
            cfg["trials"] = args.trials
        cfg.setdefault("trials", pr.DEFAULT_TRIALS)
        cfg.setdefault("reports", list(REPORTS))
        cfg.setdefault("settings", pr.CHSH_STRATEGY.to_dict())
    # worker count never changes the output, so it stays out of the config echo
    cfg_workers = cfg.pop("workers", 1)
    workers = getattr(args, "workers", None)
    if workers is not None and workers < 1:
        raise ConfigError("--workers must be >= 1")
    return execute(cfg, Path(args.out), args.gates, workers or cfg_workers)


def cmd_gallery(args: argparse.Namespace) -> int:
    params: dict[str, Any] = {}
    if args.config:
        params = _load_config(args.config)
        if not isinstance(params, dict):
            raise ConfigError("gallery config must be a JSON object of parameters")
    cfg = validate_config({"schema_version": SCHEMA_VERSION, "protocol": args.name, "gallery": params})
    return _run_resolved(cfg, args)


def format_oracle(label: "BellLabel | str", a: float, b: float) -> str:
    label = BellLabel.parse(label)
    table = qc.bell_joint_distribution(label, a, b)
    e = qc.correlation(qc.bell_state(label), a, b)
    g = lambda x: f"{x:.12g}"  # noqa: E731
    lines = [
        f"state {label} a={g(qc.normalize_angle(a))} b={g(qc.normalize_angle(b))}",
        f"P(+,+) = {g(table[0, 0])}",
        f"P(+,-) = {g(table[0, 1])}",
        f"P(-,+) = {g(table[1, 0])}",
        f"P(-,-) = {g(table[1, 1])}",
        f"P(A=+) = {g(table[0].sum())}",
        f"P(A=-) = {g(table[1].sum())}",
        f"P(B=+) = {g(table[:, 0].sum())}",
        f"P(B=-) = {g(table[:, 1].sum())}",
        f"E(a,b) = {g(e)}",
    ]
    return "\n".join(lines)


def cmd_oracle(args: argparse.Namespace) -> int:
    try:
        label = BellLabel.parse(args.label)
        a, b = parse_angle(args.a), parse_angle(args.b)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(format_oracle(label, a, b))
    return EXIT_OK


def format_combos(combos: Sequence[tuple]) -> str:
    if not combos:
        return "none found"
    sign = lambda x: "+1" if x > 0 else "-1"  # noqa: E731
    return "\n".join(f"a={_fmt(a)} b={_fmt(b)} A={sign(A)} B={sign(B)} M={m}" for a, b, A, B, m in combos)


def cmd_combos(args: argparse.Namespace) -> int:
    grid = []
    for item in args.grid or []:
        parts = item.split(",")
        if len(parts) != 2:
            raise ConfigError(f"--grid expects 'a,b', got {item!r}")
        try:
            grid.append((parse_angle(parts[0]), parse_angle(parts[1])))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    print(format_combos(pr.zero_probability_combos(args.geometry, grid)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bellselect", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def run_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--gates", action="store_true", help="exit 3 if an acceptance gate fails")

    p_run = sub.add_parser("run", help="run a protocol or gallery config")
    run_flags(p_run)
    p_run.add_argument("--trials", type=int, help="override the configured trial count")
    p_run.add_argument("--workers", type=int, help="worker threads (output is identical for any value)")
    p_run.set_defaults(func=cmd_run)

    p_gal = sub.add_parser("gallery", help="run a gallery example with default or given parameters")
    p_gal.add_argument("name", choices=GALLERY)
    run_flags(p_gal)
    p_gal.set_defaults(func=cmd_gallery, trials=None)

    p_or = sub.add_parser("oracle", help="print the exact joint table for a Bell state")
    p_or.add_argument("--label", default="C0")
    p_or.add_argument("--a", default="0")
    p_or.add_argument("--b", default="0")
    p_or.set_defaults(func=cmd_oracle)

    p_co = sub.add_parser("combos", help="list zero-probability (a, b, A, B, M) tuples")
    p_co.add_argument("--geometry", default=pr.Geometry.M_FUTURE.value, choices=[g.value for g in pr.Geometry])
    p_co.add_argument("--grid", action="append", metavar="A,B", help="setting pair; repeatable")
    p_co.set_defaults(func=cmd_combos)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
