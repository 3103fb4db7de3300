"""Command-line entry point.

Every subcommand reads an optional JSON config, applies flag overrides, writes
CSV/JSON artifacts under ``--out``, and prints a JSON summary. Failures exit
with status 1 (bad input) or 2 (runtime error) and a JSON error object on stderr.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import subprocess
import sys
import time
import typing
from pathlib import Path

import numpy as np

from ..coding.labeling import LabelSearchError
from ..dmc import build_dmc, mutual_information, r_max, r_unif
from ..spectral import periodogram_estimate, psd, relative_l2, with_bandwidth
from ..waveforms import save_set
from . import sweeps
from .config import ConfigError, SimConfig, embed


def _flag_type(tp):
    args = typing.get_args(tp)
    if typing.get_origin(tp) is tuple:
        return args[0], "+"
    if type(None) in args:
        return next(a for a in args if a is not type(None)), None
    return tp, None


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    hints = typing.get_type_hints(SimConfig)
    for f in dataclasses.fields(SimConfig):
        tp, nargs = _flag_type(hints[f.name])
        flag = "--" + f.name.replace("_", "-")
        if tp is bool:
            p.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction, default=None)
        else:
            p.add_argument(flag, dest=f.name, type=tp, nargs=nargs, default=None)


def resolve_config(ns: argparse.Namespace) -> SimConfig:
    base = SimConfig.load(ns.config).to_dict() if ns.config else {}
    for f in dataclasses.fields(SimConfig):
        v = getattr(ns, f.name, None)
        if v is not None:
            base[f.name] = v
    if ns.out:
        base["out_dir"] = ns.out
    return SimConfig.from_dict(base)


def _out(cfg: SimConfig) -> Path:
    p = Path(cfg.out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _git_describe() -> str | None:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=Path(__file__).parent,
                             capture_output=True, text=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return None
    return out.stdout.strip() or None


def _finish(cfg: SimConfig, name: str, payload: dict, t0: float) -> dict:
    meta = {"command": name, "git_describe": _git_describe(), "runtime_s": round(time.time() - t0, 3)}
    doc = embed(cfg, {**meta, **payload})
    (_out(cfg) / f"{name}.json").write_text(json.dumps(doc, indent=2, default=_jsonable))
    return doc


def cmd_build_set(cfg: SimConfig) -> dict:
    wset = sweeps.full_set(cfg)
    path = _out(cfg) / "waveform_set.json"
    save_set(wset, path)
    return {"m": wset.m, "power": wset.power, "path": str(path)}


def cmd_spectrum(cfg: SimConfig) -> dict:
    wset = sweeps.full_set(cfg)
    if cfg.m and cfg.m < wset.m:
        wset = sweeps.select(cfg).subset
    spec = with_bandwidth(psd(wset, cfg.pad), cfg.eta)
    spec.write_csv(_out(cfg) / "psd.csv")
    est, emp_power = periodogram_estimate(wset, 10_000, cfg.seed, cfg.pad)
    return {**spec.summary(), "m": wset.m, "periodogram_rel_l2": relative_l2(est, spec), "empirical_power": emp_power}


def cmd_rate_sweep(cfg: SimConfig) -> dict:
    rows = sweeps.sweep_rate(cfg)
    sweeps.write_csv(rows, _out(cfg) / "rate_sweep.csv")
    best = sweeps.best_by_snr(rows)
    return {"rows": len(rows), "best": {str(k): v for k, v in best.items()},
            "r_max": r_max(cfg.kappa, cfg.n, cfg.T_N), "r_unif": r_unif(cfg.kappa, cfg.n, cfg.T_N)}


def cmd_capacity(cfg: SimConfig) -> dict:
    rows = sweeps.capacity_sweep(cfg)
    sweeps.write_csv(rows, _out(cfg) / "capacity.csv")
    return {"rows": rows}


def cmd_select(cfg: SimConfig) -> dict:
    sel = sweeps.select(cfg)
    rows = []
    for snr in cfg.snr_db:
        s = sweeps.rate_at(sel, snr)
        rows.append({"snr_db": float(snr), "I_bits": s.I_bits, "R_bits_per_s": s.R, "SE": s.SE, "W_eta": s.W_eta, "m": s.m})
    sweeps.write_csv(rows, _out(cfg) / "select.csv")
    save_set(sel.subset, _out(cfg) / "selected_set.json")
    build_dmc(sel.subset, cfg.snr_db[0]).save(_out(cfg) / "dmc.npz")
    return {"m": sel.m, "W_eta": sel.W_eta, "achieved_eta": sel.achieved_eta, "rows": rows,
            "members": [w.uid for w in sel.subset]}


def cmd_label(cfg: SimConfig) -> dict:
    setup = sweeps.ber_setup(cfg)
    setup.labeling.save(_out(cfg) / "labeling.json")
    return {"q": setup.labeling.q, "d_sum": setup.labeling.d_sum, "labeling": cfg.labeling}


def cmd_ber_sweep(cfg: SimConfig) -> dict:
    setup = sweeps.ber_setup(cfg)
    rows = sweeps.sweep_ber(cfg, setup)
    sweeps.write_csv(rows, _out(cfg) / "ber_sweep.csv")
    return {"coded_bits_per_dim": setup.coded_bits_per_dim, "rows": rows}


def cmd_asymptote(cfg: SimConfig) -> dict:
    rows = sweeps.asymptote_table(cfg)
    sweeps.write_csv(rows, _out(cfg) / "asymptote.csv")
    fits = {str(e): sweeps.log_growth_fit(rows, e) for e in cfg.etas}
    return {"rows": rows, "log2_fit_slope_intercept": fits}


COMMANDS = {
    "build-set": cmd_build_set,
    "spectrum": cmd_spectrum,
    "rate-sweep": cmd_rate_sweep,
    "capacity": cmd_capacity,
    "select": cmd_select,
    "label": cmd_label,
    "ber-sweep": cmd_ber_sweep,
    "asymptote": cmd_asymptote,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="onebitlink", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output directory (overrides out_dir)")
        _add_config_flags(p)
    return parser


def _error(kind: str, msg: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": msg}), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    t0 = time.time()
    try:
        cfg = resolve_config(ns)
    except (ConfigError, OSError) as e:
        return _error("config", str(e), 1)
    try:
        payload = COMMANDS[ns.command](cfg)
        doc = _finish(cfg, ns.command.replace("-", "_"), payload, t0)
    except (ValueError, LabelSearchError) as e:
        return _error(type(e).__name__, str(e), 1)
    except Exception as e:  # noqa: BLE001 - report anything else as a runtime failure
        return _error(type(e).__name__, str(e), 2)
    print(json.dumps({k: v for k, v in doc.items() if k != "config"}, default=_jsonable, indent=2))
    return 0


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x).__name__)


if __name__ == "__main__":
    raise SystemExit(main())
