"""Command-line front end.

    multibump <command> [--config FILE] [flags]

Commands: ground, radius, solve, spectrum, pohozaev, two-ring, verify-all.
Outputs go under --out (default ./results); a manifest_<command>.json is
written last.  Exit codes: 0 success, 1 configuration error, 2 convergence
or assertion failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import COMMANDS, RunConfig, load_file, resolve
from .errors import ConfigError, MultibumpError, NoInteriorMax

EXIT_OK, EXIT_CONFIG, EXIT_FAIL = 0, 1, 2


class Run:
    """Collects outputs and assertion groups of one command."""

    def __init__(self, command: str, cfg: RunConfig):
        self.command = command
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs: list[str] = []
        self.groups: dict[str, bool] = {}
        self.notes: dict[str, str] = {}

    def check(self, group: str, ok: bool, note: str = "") -> None:
        self.groups[group] = bool(ok) and self.groups.get(group, True)
        if note and not ok:
            self.notes[group] = "; ".join(filter(None, [self.notes.get(group), note]))

    def write_csv(self, name: str, header: list[str], rows) -> Path:
        path = self.out / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(row[h]) for h in header])
        self.outputs.append(str(path))
        return path

    def write_json(self, name: str, data) -> Path:
        path = self.out / name
        path.write_text(json.dumps(_plain(data), indent=2, sort_keys=True) + "\n")
        self.outputs.append(str(path))
        return path

    def track(self, path) -> None:
        self.outputs.append(str(path))

    @property
    def passed(self) -> bool:
        return all(self.groups.values())

    def report(self, echo=print) -> None:
        for group, ok in self.groups.items():
            note = f": {self.notes[group]}" if group in self.notes else ""
            echo(f"{'PASS' if ok else 'FAIL'} {self.command} {group}{note}")

    def manifest(self, started: float, error: str = "") -> Path:
        data = {"command": self.command, "config": self.cfg.to_dict(), "version": __version__,
                "wall_clock": time.perf_counter() - started, "outputs": self.outputs,
                "assertions": self.groups, "notes": self.notes, "error": error,
                "status": "ok" if self.passed and not error else "failed"}
        path = self.out / f"manifest_{self.command}.json"
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(json.dumps(_plain(data), indent=2, sort_keys=True) + "\n")
        os.replace(tmp, path)
        return path


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _pot(cfg: RunConfig):
    from .model import Potential

    return Potential(cfg.a1, cfg.a2, cfg.alpha)


def _map(fn, items, jobs: int):
    """Sweep items in order, across processes when jobs > 1."""
    items = list(items)
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


# -- ground -----------------------------------------------------------------

def cmd_ground(run: Run) -> None:
    from .ground_state import closed_form_1d, ground_state

    cfg = run.cfg
    gs = ground_state(cfg.dim, cfg.p)
    derrick, poho = gs.identity_residuals()
    summary = {"dim": gs.dim, "p": gs.p, "u0": gs.u0, "decay_const": gs.decay_const, "mass2": gs.mass2,
               "massP1": gs.massP1, "grad2": gs.grad2, "energy": gs.energy, "derrick_residual": derrick,
               "pohozaev_residual": poho, "h_ode": gs.h_ode, "r_max": gs.r_max}
    run.check("identities", max(derrick, poho) <= 1e-6, f"residuals {derrick:.2e}, {poho:.2e}")
    if cfg.dim == 1:
        err = float(np.max(np.abs(gs.u_table - closed_form_1d(cfg.p, gs.grid))))
        summary["closed_form_sup_error"] = err
        run.check("closed_form", err <= 1e-8, f"sup error {err:.2e}")
    run.write_json(f"ground_dim{cfg.dim}_p{cfg.p:g}.json", summary)


# -- radius -----------------------------------------------------------------

def _radius_item(args):
    from .ground_state import ground_state
    from .model import radius_window
    from .reduced_energy import energy_constants, find_ring_radius

    cfg, k = args
    gs = ground_state(cfg.dim, cfg.p)
    pot = _pot(cfg)
    rep = find_ring_radius(k, energy_constants(gs), pot, gs, radius_window(k, cfg.alpha, cfg.beta),
                           all_pairs=cfg.all_pairs)
    return rep


def cmd_radius(run: Run) -> None:
    from .ground_state import ground_state
    from .reduced_energy import balance_slope, energy_constants

    cfg = run.cfg
    ks = cfg.sweep_or([cfg.k])
    gs = ground_state(cfg.dim, cfg.p)
    consts = energy_constants(gs)
    reports = _map(_radius_item, [(cfg, k) for k in ks], cfg.jobs)
    run.write_csv("radius.csv", ["k", "r_k", "lo", "hi", "F_max", "balance_ratio"], [r.row() for r in reports])
    summary = {"constants": vars(consts), "rows": []}
    for rep in reports:
        summary["rows"].append({**rep.row(), "scaled": rep.scaled, "in_window": rep.in_window,
                                "d2F": rep.d2F, "coefficient_match": rep.coefficient_match,
                                "coef_rel_diff": rep.extras["coef_rel_diff"]})
        run.check("window", rep.in_window, f"k={rep.k} r_k/(k ln k)={rep.scaled:.4f}")
        if rep.k >= 16:
            run.check("balancing", 0.8 <= rep.residual_ratio <= 1.25,
                      f"k={rep.k} ratio={rep.residual_ratio:.4f}")
    if len(reports) >= 3:
        summary["balance_slope"] = balance_slope(reports, gs, cfg.alpha)
    run.write_json("radius.json", summary)


# -- solve / spectrum / pohozaev ---------------------------------------------

def _bundle(cfg: RunConfig, k: int):
    from .ground_state import ground_state
    from .solver import cached_solve_full

    gs = ground_state(cfg.dim, cfg.p)
    pot = _pot(cfg)
    pot.check_exponent(cfg.p)
    return gs, pot, cached_solve_full(k, gs, pot, h=cfg.h, tau=cfg.tau)


def _solve_item(args):
    cfg, k = args
    return _bundle(cfg, k)[2]


def cmd_solve(run: Run) -> None:
    from .model import radius_window

    cfg = run.cfg
    ks = cfg.sweep_or([cfg.k])
    bundles = _map(_solve_item, [(cfg, k) for k in ks], cfg.jobs)
    for b in bundles:
        k = b.cfg.k
        g = b.grid
        u = b.u.values[g.interior_mask()]
        s = b.summary()
        s["u_min"] = float(u.min())
        run.write_json(f"solve_k{k}.json", s)
        g.to_csv(run.out / f"u_k{k}.csv", b.u.values)
        run.track(run.out / f"u_k{k}.csv")
        g.to_csv(run.out / f"omega_k{k}.csv", b.omega.values)
        run.track(run.out / f"omega_k{k}.csv")
        run.check("residual", b.residual_sup <= 1e-8, f"k={k} residual {b.residual_sup:.2e}")
        run.check("positivity", u.min() > 0, f"k={k} min u {u.min():.2e}")
        run.check("projection", b.proj_residual <= 1e-8, f"k={k} {b.proj_residual:.2e}")
        win = radius_window(k, cfg.alpha, cfg.beta)
        run.check("window", win.contains(b.r_star), f"k={k} r_star={b.r_star:.4f} not in [{win.lo:.3f}, {win.hi:.3f}]")


def cmd_spectrum(run: Run) -> None:
    from .spectral import spectrum

    cfg = run.cfg
    gs, pot, b = _bundle(cfg, cfg.k)
    rep = spectrum(b, pot, gs, num_eigs=cfg.num_eigs, tau=cfg.tau, blocks="rotation" if cfg.quick else "all")
    run.write_csv(f"spectrum_k{cfg.k}.csv", ["k", "space", "idx", "lambda"], rep.rows())
    run.write_json(f"spectrum_k{cfg.k}.json", rep.summary())
    run.check("gap", rep.gap_sector >= 10 * rep.full_min,
              f"gap {rep.gap_sector:.2e} vs full-disc min {rep.full_min:.2e}")
    run.check("kernel", rep.kernel_overlap >= 0.99, f"overlap {rep.kernel_overlap:.4f}")


def cmd_pohozaev(run: Run) -> None:
    from .acceptance import _Checks, negative_control, pohozaev_checks, pohozaev_rows
    from .solver import cached_refined

    cfg = run.cfg
    gs, pot, b = _bundle(cfg, cfg.k)
    bundles = [b] if cfg.quick else [b, cached_refined(b, gs, pot, tau=cfg.tau)]
    rows = pohozaev_rows(bundles, pot, gs.p)
    control = negative_control(b, pot, gs.p, cfg.seed)
    run.write_csv(f"pohozaev_k{cfg.k}.csv", ["radius_frac", "h", "lhs", "rhs", "residual"], rows)
    checks, details = _Checks(), {}
    pohozaev_checks(rows, control, checks, details)
    run.write_json(f"pohozaev_k{cfg.k}.json", details)
    run.check("identity", not checks.failures, "; ".join(checks.failures))


# -- two-ring ---------------------------------------------------------------

def _two_ring_item(args):
    from .ground_state import ground_state
    from .reduced_energy import energy_constants
    from .two_ring import decoupling, find_outer_radius

    cfg, n = args
    gs4 = ground_state(cfg.dim, cfg.p)
    pot = _pot(cfg)
    consts = energy_constants(gs4)
    try:
        rep = find_outer_radius(cfg.k, n, gs4, pot, consts, beta=cfg.beta)
    except NoInteriorMax as exc:
        return n, None, str(exc)
    rep.extras["decoupling"] = decoupling(cfg.k, n, gs4, pot, consts)
    return n, rep, ""


def cmd_two_ring(run: Run) -> None:
    cfg = run.cfg
    ns = cfg.sweep_or([cfg.n])
    results = _map(_two_ring_item, [(cfg, n) for n in ns], cfg.jobs)
    ok = [rep for _, rep, _ in results if rep is not None]
    run.write_csv(f"two_ring_k{cfg.k}.csv", ["n", "t_n", "lo", "hi", "F", "cross_ratio"], [r.row() for r in ok])
    summary = {}
    for n, rep, err in results:
        if rep is None:
            summary[str(n)] = {"error": err}
            run.check("interior", False, f"n={n}: {err}")
            continue
        lo, hi = rep.bracket
        summary[str(n)] = {**rep.row(), "bracket": [lo, hi], "d2F": rep.d2F, "balance_ratio": rep.balance_ratio,
                           "scaled": rep.t_n / (n * math.log(n)), "decoupling": rep.extras["decoupling"]}
        run.check("interior", lo < rep.t_n < hi, f"n={n}")
        run.check("cross", rep.cross_ratio <= 0.05, f"n={n} ratio {rep.cross_ratio:.2e}")
        run.check("decoupling", rep.extras["decoupling"] < 1e-3, f"n={n} shift {rep.extras['decoupling']:.2e}")
    if len(ns) > 1:
        ts = [r.t_n for r in ok]
        run.check("monotone", len(ok) == len(ns) and all(a < b for a, b in zip(ts, ts[1:])),
                  "t_n not increasing over the whole sweep")
    run.write_json(f"two_ring_k{cfg.k}.json", summary)


# -- verify-all -------------------------------------------------------------

def cmd_verify_all(run: Run) -> None:
    from .acceptance import CRITERIA, QUICK, Context, run_all
    from .ground_state import default_cache_dir

    cfg = run.cfg
    ctx = Context(cache_dir=default_cache_dir(), seed=cfg.seed, h=cfg.h, tau=cfg.tau)
    results = run_all(ctx, QUICK if cfg.quick else sorted(CRITERIA))
    run.write_csv("verify.csv", ["number", "name", "passed", "runtime", "budget"],
                  [r.to_dict() for r in results])
    run.write_json("verify.json", [r.to_dict() for r in results])
    for r in results:
        run.check(f"criterion{r.number}", r.passed, "; ".join(r.failures))


HANDLERS = {
    "ground": cmd_ground,
    "radius": cmd_radius,
    "solve": cmd_solve,
    "spectrum": cmd_spectrum,
    "pohozaev": cmd_pohozaev,
    "two-ring": cmd_two_ring,
    "verify-all": cmd_verify_all,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (or a run manifest)")
    common.add_argument("--out", help="output directory (default ./results)")
    common.add_argument("--jobs", type=int, help="worker processes for sweeps (default: logical cores)")
    common.add_argument("--seed", type=int, help="seed for the random negative-control fields")
    for name, kind in (("k", int), ("n", int), ("dim", int), ("p", float), ("alpha", float), ("a1", float),
                       ("a2", float), ("beta", float), ("h", float), ("tau", float)):
        common.add_argument(f"--{name}", type=kind)
    common.add_argument("--sweep", help="'8,12,16' or 'k0:k1[:step]' (k for radius/solve, n for two-ring)")
    common.add_argument("--num-eigs", dest="num_eigs", type=int)
    common.add_argument("--all-pairs", dest="all_pairs", action="store_const", const=True,
                        help="reduced energy with every pair interaction, not only neighbours")
    common.add_argument("--quick", action="store_const", const=True, help="reduced work per command")
    parser = argparse.ArgumentParser(prog="multibump", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"multibump {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


FLAG_KEYS = ("out", "jobs", "seed", "k", "n", "dim", "p", "alpha", "a1", "a2", "beta", "h", "tau", "sweep",
             "num_eigs", "all_pairs", "quick")


def dispatch(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    try:
        file_values = load_file(args.config) if args.config else {}
        cfg = resolve(args.command, file_values, {key: getattr(args, key) for key in FLAG_KEYS})
        run = Run(args.command, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        HANDLERS[args.command](run)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        run.manifest(started, f"{type(exc).__name__}: {exc}")
        return EXIT_CONFIG
    except MultibumpError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        run.check("run", False, str(exc))
        run.report()
        run.manifest(started, f"{type(exc).__name__}: {exc}")
        return EXIT_FAIL
    run.report()
    run.manifest(started)
    return EXIT_OK if run.passed else EXIT_FAIL


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
