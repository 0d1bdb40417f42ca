"""Command-line interface: config-driven runs emitting plot-ready data.

Commands
--------
qtraj trajectories --config cfg.json   per-trajectory CSV dumps + summary
qtraj spectrum     --config cfg.json --route {mc,analytic,closed-form}
qtraj figures      {fig1,fig2}         baked-in parameter sets
qtraj bounds       --config cfg.json   complementary-phase bound report

Configs are strict JSON: unknown keys are rejected and every message names
the offending field path.  All randomness flows from the master seed, so a
given config produces byte-identical outputs on every run and worker count.
Exit codes: 0 ok, 1 config error, 2 I/O error, 3 bound violation.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .lindblad import cf4_step_matrices, pauli_components, steady_state
from .model import (Channel, ModelSpec, ParameterError, TwoLevelParams,
                    WaveSpec, build_two_level_model)
from .numerics import unvec, vec
from .spectrum import (check_uncertainty_bounds, heterodyne_spectrum,
                       homodyne_spectrum, spectrum_analytic, spectrum_mc,
                       sweep_two_level_params, fluorescence_spectrum)
from .trajectory import (TimeGrid, integrate_linear_sme, posterior_states,
                         run_sme_ensemble, sample_wiener)

FIG1_PARAMS = {"gamma": 1.0, "p": 0.8, "nbar": 0.0, "kd": 0.0,
               "delta_nu": 1.4937, "omega": 1.4360, "theta": -0.1748}
FIG2_PARAMS = {"gamma": 1.0, "p": 0.8, "nbar": 0.01, "kd": 0.7,
               "delta_nu": 1.5, "omega": 8.0}

_SUMMARY_MAX_ROWS = 4000


class ConfigError(Exception):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _fmt(x: float) -> str:
    return "%.17g" % float(x)


def _write_csv(path, header, columns) -> None:
    rows = len(columns[0])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(rows):
            fh.write(",".join(_fmt(col[i]) for col in columns) + "\n")


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# config parsing


def _check_keys(obj, path, allowed, required):
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}", "unknown key")
    for key in required:
        if key not in obj:
            raise ConfigError(f"{path}.{key}", "missing required key")


def _number(obj, path, minimum=None, maximum=None, strict_min=False,
            integer=False, default=None, allow_none=False):
    parts = path.split(".")
    val = obj.get(parts[-1], default) if isinstance(obj, dict) else obj
    if val is None:
        if allow_none or default is None:
            return None if default is None else default
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(path, "expected a number")
    if integer and int(val) != val:
        raise ConfigError(path, "expected an integer")
    if minimum is not None and (val <= minimum if strict_min else val < minimum):
        cmp = ">" if strict_min else ">="
        raise ConfigError(path, f"must be {cmp} {minimum}")
    if maximum is not None and val > maximum:
        raise ConfigError(path, f"must be <= {maximum}")
    return int(val) if integer else float(val)


def _complex_entry(val, path):
    if isinstance(val, (int, float)) and not isinstance(val, bool):
        return complex(val)
    if (isinstance(val, list) and len(val) == 2
            and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in val)):
        return complex(val[0], val[1])
    raise ConfigError(path, "expected a number or [re, im] pair")


def _matrix(val, path, dim):
    if not (isinstance(val, list) and len(val) == dim
            and all(isinstance(row, list) and len(row) == dim for row in val)):
        raise ConfigError(path, f"expected a {dim}x{dim} matrix")
    return np.array([[_complex_entry(v, f"{path}[{i}][{j}]")
                      for j, v in enumerate(row)]
                     for i, row in enumerate(val)], dtype=complex)


@dataclass
class RunConfig:
    model: ModelSpec
    params: TwoLevelParams | None
    detection: str
    theta: float
    initial_state: str
    grid: TimeGrid | None
    n_traj: int
    master_seed: int | None
    n_groups: int
    resample_interval: float | None
    mu_grid: np.ndarray | None
    theta_list: list
    bounds: dict = field(default_factory=dict)
    out_dir: str = "out"

    def model_at(self, theta: float) -> ModelSpec:
        if self.params is not None:
            return build_two_level_model(self.params, self.detection, theta=theta)
        m = self.model
        return ModelSpec(dim=m.dim, hamiltonian=m.hamiltonian, channels=m.channels,
                         theta=theta, local_oscillator=m.local_oscillator)

    def initial_density(self) -> np.ndarray:
        kind = self.initial_state
        if kind == "steady":
            if self.params is not None:
                return steady_state(self.params)
            raise ConfigError("initial_state",
                              "steady state is only built for two_level models")
        if kind == "mixed":
            d = self.model.dim
            return np.eye(d, dtype=complex) / d
        if kind in ("ground", "excited"):
            if self.model.dim != 2:
                raise ConfigError("initial_state", f"{kind} needs a two-level model")
            rho = np.zeros((2, 2), dtype=complex)
            rho[1 if kind == "ground" else 0, 1 if kind == "ground" else 0] = 1.0
            return rho
        raise ConfigError("initial_state", f"unknown kind {kind!r}")


def _parse_model(raw) -> tuple[ModelSpec | None, TwoLevelParams | None]:
    kind = raw.get("type", "two_level")
    if kind == "two_level":
        _check_keys(raw, "model",
                    {"type", "gamma", "p", "nbar", "kd", "omega", "delta_nu",
                     "nu", "nu_lo"},
                    {"gamma", "p"})
        try:
            params = TwoLevelParams(
                gamma=_number(raw, "model.gamma", minimum=0, strict_min=True),
                p=_number(raw, "model.p"),
                nbar=_number(raw, "model.nbar", minimum=0, default=0.0),
                kd=_number(raw, "model.kd", minimum=0, default=0.0),
                omega=_number(raw, "model.omega", minimum=0, default=0.0),
                delta_nu=_number(raw, "model.delta_nu", default=0.0),
                nu=_number(raw, "model.nu", minimum=0, default=0.0),
                nu_lo=_number(raw, "model.nu_lo", default=None, allow_none=True),
            )
        except ParameterError as exc:
            key = "p" if "p must" in str(exc) else "parameters"
            raise ConfigError(f"model.{key}", str(exc)) from exc
        return None, params
    if kind == "generic":
        _check_keys(raw, "model",
                    {"type", "dim", "hamiltonian", "channels", "lo_frequency"},
                    {"dim", "hamiltonian", "channels"})
        dim = _number(raw, "model.dim", minimum=1, integer=True)
        h0 = _matrix(raw["hamiltonian"], "model.hamiltonian", dim)
        channels = []
        if not isinstance(raw["channels"], list) or not raw["channels"]:
            raise ConfigError("model.channels", "expected a nonempty list")
        for k, ch in enumerate(raw["channels"]):
            _check_keys(ch, f"model.channels[{k}]",
                        {"op", "amplitude", "frequency"}, {"op"})
            op = _matrix(ch["op"], f"model.channels[{k}].op", dim)
            amp = _complex_entry(ch.get("amplitude", 0.0),
                                 f"model.channels[{k}].amplitude")
            freq = _number(ch, f"model.channels[{k}].frequency", default=0.0)
            wave = (WaveSpec.zero() if amp == 0.0
                    else WaveSpec.monochromatic(amp, freq))
            channels.append(Channel(op, wave))
        lo_freq = _number(raw, "model.lo_frequency", default=0.0)
        try:
            model = ModelSpec(dim=dim, hamiltonian=h0, channels=tuple(channels),
                              local_oscillator=WaveSpec.monochromatic(1.0, lo_freq))
        except ParameterError as exc:
            raise ConfigError("model", str(exc)) from exc
        return model, None
    raise ConfigError("model.type", f"unknown model type {kind!r}")


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from exc
    _check_keys(raw, "<root>",
                {"schema_version", "units", "model", "detection", "theta",
                 "initial_state", "grid", "ensemble", "spectrum", "bounds",
                 "output"},
                {"schema_version", "units", "model"})
    if raw["schema_version"] != 1:
        raise ConfigError("schema_version", "unsupported version (expected 1)")
    if raw["units"] != "gamma":
        raise ConfigError("units", 'expected the marker "gamma"')
    model, params = _parse_model(raw["model"])
    detection = raw.get("detection", "homodyne")
    if detection not in ("homodyne", "heterodyne"):
        raise ConfigError("detection", "expected homodyne or heterodyne")
    theta = _number(raw, "theta", default=0.0)
    if not (-math.pi < theta <= math.pi):
        raise ConfigError("theta", "must lie in (-pi, pi]")
    initial_state = raw.get("initial_state", "steady" if params is not None else "mixed")
    if initial_state not in ("steady", "ground", "excited", "mixed"):
        raise ConfigError("initial_state", f"unknown kind {initial_state!r}")

    grid = None
    if "grid" in raw:
        g = raw["grid"]
        _check_keys(g, "grid", {"horizon", "n_steps"}, {"horizon", "n_steps"})
        grid = TimeGrid(
            horizon=_number(g, "grid.horizon", minimum=0, strict_min=True),
            n_steps=_number(g, "grid.n_steps", minimum=1, integer=True))

    n_traj, master_seed, n_groups, resample = 1, None, 1, None
    if "ensemble" in raw:
        e = raw["ensemble"]
        _check_keys(e, "ensemble",
                    {"n_traj", "master_seed", "n_groups", "resample_interval"},
                    {"n_traj"})
        n_traj = _number(e, "ensemble.n_traj", minimum=1, integer=True)
        master_seed = _number(e, "ensemble.master_seed", integer=True,
                              default=None, allow_none=True)
        n_groups = _number(e, "ensemble.n_groups", minimum=1, integer=True,
                           default=1)
        resample = _number(e, "ensemble.resample_interval", minimum=0,
                           strict_min=True, default=None, allow_none=True)

    mu_grid, theta_list = None, [theta]
    if "spectrum" in raw:
        s = raw["spectrum"]
        _check_keys(s, "spectrum",
                    {"mu_min", "mu_max", "n_mu", "theta_list"},
                    {"mu_min", "mu_max", "n_mu"})
        lo = _number(s, "spectrum.mu_min")
        hi = _number(s, "spectrum.mu_max")
        if hi < lo:
            raise ConfigError("spectrum.mu_max", "must be >= spectrum.mu_min")
        n_mu = _number(s, "spectrum.n_mu", minimum=1, integer=True)
        mu_grid = np.linspace(lo, hi, n_mu)
        if "theta_list" in s:
            if not (isinstance(s["theta_list"], list) and s["theta_list"]):
                raise ConfigError("spectrum.theta_list", "expected a nonempty list")
            theta_list = [
                _number(v, f"spectrum.theta_list[{i}]")
                for i, v in enumerate(s["theta_list"])
            ]

    bounds = {}
    if "bounds" in raw:
        b = raw["bounds"]
        _check_keys(b, "bounds",
                    {"theta", "theta_samples", "mu_min", "mu_max", "n_mu",
                     "sweep_n_sets", "sweep_seed"}, set())
        bounds["theta"] = _number(b, "bounds.theta", default=theta)
        samples = b.get("theta_samples", [0.0, 0.3, 1.1])
        if not isinstance(samples, list):
            raise ConfigError("bounds.theta_samples", "expected a list")
        bounds["theta_samples"] = [
            _number(v, f"bounds.theta_samples[{i}]") for i, v in enumerate(samples)]
        lo = _number(b, "bounds.mu_min", default=0.0)
        hi = _number(b, "bounds.mu_max", default=10.0)
        if hi < lo:
            raise ConfigError("bounds.mu_max", "must be >= bounds.mu_min")
        n_mu = _number(b, "bounds.n_mu", minimum=2, integer=True, default=201)
        bounds["mu_grid"] = np.linspace(lo, hi, n_mu)
        bounds["sweep_n_sets"] = _number(b, "bounds.sweep_n_sets", minimum=0,
                                         integer=True, default=0)
        bounds["sweep_seed"] = _number(b, "bounds.sweep_seed", integer=True,
                                       default=20260810)

    out_dir = "out"
    if "output" in raw:
        o = raw["output"]
        _check_keys(o, "output", {"directory"}, {"directory"})
        if not isinstance(o["directory"], str) or not o["directory"]:
            raise ConfigError("output.directory", "expected a nonempty string")
        out_dir = o["directory"]

    return RunConfig(model=model if model is not None else
                     build_two_level_model(params, detection, theta=theta),
                     params=params, detection=detection, theta=theta,
                     initial_state=initial_state, grid=grid, n_traj=n_traj,
                     master_seed=master_seed, n_groups=n_groups,
                     resample_interval=resample, mu_grid=mu_grid,
                     theta_list=theta_list, bounds=bounds, out_dir=out_dir)


def _resolve_seed(cfg: RunConfig, args) -> int:
    if args.seed is not None:
        return args.seed
    if cfg.master_seed is not None:
        return cfg.master_seed
    env = os.environ.get("QTRAJ_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError("QTRAJ_SEED", "must be an integer") from exc
    raise ConfigError("ensemble.master_seed",
                      "missing (set it, pass --seed, or export QTRAJ_SEED)")


def _out_dir(cfg: RunConfig, args) -> str:
    out = args.out if args.out else cfg.out_dir
    os.makedirs(out, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands


def _reference_bloch(model: ModelSpec, rho0: np.ndarray, grid: TimeGrid):
    """Reduced-state Pauli components on the grid (deterministic reference)."""
    eta = vec(rho0)
    out = np.empty((grid.n_steps + 1, 3))
    out[0] = pauli_components(rho0).real
    for j, step in enumerate(cf4_step_matrices(model, 0.0, grid.dt, grid.n_steps)):
        eta = step @ eta
        out[j + 1] = pauli_components(unvec(eta, model.dim)).real
    return out


def cmd_trajectories(cfg: RunConfig, args) -> int:
    if cfg.grid is None:
        raise ConfigError("grid", "missing required section")
    seed = _resolve_seed(cfg, args)
    model = cfg.model_at(cfg.theta)
    rho0 = cfg.initial_density()
    out = _out_dir(cfg, args)
    grid = cfg.grid
    stride = max(1, -(-grid.n_steps // _SUMMARY_MAX_ROWS))
    rows = np.arange(0, grid.n_steps + 1, stride)
    times = grid.times()

    weights = np.empty((cfg.n_traj, rows.size))
    blochs = np.empty((cfg.n_traj, rows.size, 3))
    for i in range(cfg.n_traj):
        path = sample_wiener(grid, 1, seed, i)
        traj = integrate_linear_sme(model, rho0, path)
        rhos, dens = posterior_states(traj)
        xyz = np.stack([pauli_components(r).real for r in rhos[rows]])
        weights[i] = dens[rows]
        blochs[i] = xyz
        _write_csv(os.path.join(out, f"trajectory_{i:03d}.csv"),
                   ["t", "W1", "weight", "x", "y", "z"],
                   [times[rows], traj.output_path[rows], dens[rows],
                    xyz[:, 0], xyz[:, 1], xyz[:, 2]])
    ref = _reference_bloch(model, rho0, grid)[rows]
    mean_w = weights.mean(axis=0)
    se_w = (weights.std(axis=0, ddof=1) / math.sqrt(cfg.n_traj)
            if cfg.n_traj > 1 else np.zeros(rows.size))
    mean_b = blochs.mean(axis=0)
    _write_csv(os.path.join(out, "ensemble_summary.csv"),
               ["t", "mean_weight", "se_weight", "mean_x", "mean_y", "mean_z",
                "ref_x", "ref_y", "ref_z"],
               [times[rows], mean_w, se_w, mean_b[:, 0], mean_b[:, 1],
                mean_b[:, 2], ref[:, 0], ref[:, 1], ref[:, 2]])
    print(f"wrote {cfg.n_traj} trajectories + summary to {out}")
    return 0


def _spectrum_payload(sp, route):
    return {
        "schema_version": 1,
        "estimator": sp.estimator,
        "route": route,
        "theta": sp.theta,
        "horizon": sp.horizon,
        "delta_atoms": [{"location": loc, "coefficient": coeff}
                        for loc, coeff in sp.delta_atoms],
        "mu": [float(x) for x in sp.mu_grid],
        "inelastic": [float(x) for x in sp.inelastic],
        "elastic_curve": (None if sp.elastic_curve is None
                          else [float(x) for x in sp.elastic_curve]),
        "se_inelastic": (None if sp.se_inelastic is None
                         else [float(x) for x in sp.se_inelastic]),
    }


def _write_spectrum(out, name, sp, route):
    el = sp.elastic_curve if sp.elastic_curve is not None else np.zeros(sp.mu_grid.size)
    se = sp.se_inelastic if sp.se_inelastic is not None else np.zeros(sp.mu_grid.size)
    _write_csv(os.path.join(out, name + ".csv"),
               ["mu", "S_el", "S_inel", "S_total", "se_inel"],
               [sp.mu_grid, el, sp.inelastic, el + sp.inelastic, se])
    _write_json(os.path.join(out, name + ".json"), _spectrum_payload(sp, route))


def cmd_spectrum(cfg: RunConfig, args) -> int:
    if cfg.mu_grid is None:
        raise ConfigError("spectrum", "missing required section")
    route = args.route
    out = _out_dir(cfg, args)
    written = []
    if route == "closed-form":
        if cfg.params is None:
            raise ConfigError("model.type", "closed forms need a two_level model")
        if cfg.detection == "heterodyne":
            sp = heterodyne_spectrum(cfg.params, cfg.mu_grid)
            _write_spectrum(out, "spectrum_closed-form", sp, route)
            written.append("spectrum_closed-form")
        else:
            for i, th in enumerate(cfg.theta_list):
                sp = homodyne_spectrum(cfg.params, th, cfg.mu_grid)
                name = f"spectrum_closed-form_theta{i}"
                _write_spectrum(out, name, sp, route)
                written.append(name)
    elif route == "analytic":
        if cfg.grid is None:
            raise ConfigError("grid", "missing (analytic route needs a horizon)")
        rho0 = None
        if cfg.initial_state != "steady":
            rho0 = cfg.initial_density()
        for i, th in enumerate(cfg.theta_list):
            sp = spectrum_analytic(cfg.model_at(th), cfg.mu_grid,
                                   cfg.grid.horizon, rho0=rho0)
            name = f"spectrum_analytic_theta{i}"
            _write_spectrum(out, name, sp, route)
            written.append(name)
    elif route == "mc":
        if cfg.grid is None:
            raise ConfigError("grid", "missing (mc route needs a grid)")
        seed = _resolve_seed(cfg, args)
        rho0 = cfg.initial_density()
        for i, th in enumerate(cfg.theta_list):
            ens = run_sme_ensemble(
                cfg.model_at(th), cfg.grid, rho0, cfg.n_traj, seed,
                mu_grid=cfg.mu_grid, n_groups=cfg.n_groups,
                resample_interval=cfg.resample_interval, threads=args.threads)
            sp = spectrum_mc(ens, theta=th)
            name = f"spectrum_mc_theta{i}"
            _write_spectrum(out, name, sp, route)
            written.append(name)
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError("route", f"unknown route {route!r}")
    print(f"wrote {', '.join(written)} to {out}")
    return 0


def cmd_figures(args) -> int:
    out = args.out if args.out else "out"
    os.makedirs(out, exist_ok=True)
    if args.figure == "fig1":
        params = TwoLevelParams(gamma=FIG1_PARAMS["gamma"], p=FIG1_PARAMS["p"],
                                nbar=FIG1_PARAMS["nbar"], kd=FIG1_PARAMS["kd"],
                                omega=FIG1_PARAMS["omega"],
                                delta_nu=FIG1_PARAMS["delta_nu"], nu=0.0)
        mu = np.linspace(0.0, 6.0, 601)
        th = FIG1_PARAMS["theta"]
        solid = homodyne_spectrum(params, th, mu).inelastic
        dashed = homodyne_spectrum(params, th + math.pi / 2.0, mu).inelastic
        _write_csv(os.path.join(out, "fig1.csv"),
                   ["mu", "S_inel_solid", "S_inel_dashed"], [mu, solid, dashed])
        _write_json(os.path.join(out, "fig1_params.json"), FIG1_PARAMS)
        print(f"wrote fig1.csv, fig1_params.json to {out}")
    else:
        params = TwoLevelParams(gamma=FIG2_PARAMS["gamma"], p=FIG2_PARAMS["p"],
                                nbar=FIG2_PARAMS["nbar"], kd=FIG2_PARAMS["kd"],
                                omega=FIG2_PARAMS["omega"],
                                delta_nu=FIG2_PARAMS["delta_nu"], nu=0.0)
        mu = np.linspace(-12.0, 12.0, 961)
        curve = fluorescence_spectrum(params, mu).inelastic
        _write_csv(os.path.join(out, "fig2.csv"), ["mu", "Sigma_inel"], [mu, curve])
        _write_json(os.path.join(out, "fig2_params.json"), FIG2_PARAMS)
        print(f"wrote fig2.csv, fig2_params.json to {out}")
    return 0


def cmd_bounds(cfg: RunConfig, args) -> int:
    if not cfg.bounds:
        raise ConfigError("bounds", "missing required section")
    out = _out_dir(cfg, args)
    mu = cfg.bounds["mu_grid"]
    subject = cfg.params if cfg.params is not None else cfg.model
    report = check_uncertainty_bounds(
        subject, cfg.bounds["theta"], mu,
        theta_samples=tuple(cfg.bounds["theta_samples"]),
        T=cfg.grid.horizon if cfg.grid is not None else None)
    entries = [{
        "label": "config",
        "min_product_margin": report.min_product_margin,
        "min_mean_margin": report.min_mean_margin,
        "theta_invariance_max_dev": report.theta_invariance_max_dev,
    }]
    min_margin = min(report.min_product_margin, report.min_mean_margin)
    n_sets = cfg.bounds["sweep_n_sets"]
    if n_sets:
        for i, (params, th) in enumerate(
                sweep_two_level_params(n_sets, cfg.bounds["sweep_seed"])):
            rep = check_uncertainty_bounds(params, th, mu, theta_samples=())
            entries.append({
                "label": f"sweep_{i}",
                "min_product_margin": rep.min_product_margin,
                "min_mean_margin": rep.min_mean_margin,
            })
            min_margin = min(min_margin, rep.min_product_margin,
                             rep.min_mean_margin)
    passed = min_margin >= -1e-9
    _write_json(os.path.join(out, "bounds_report.json"), {
        "schema_version": 1,
        "mu": [float(x) for x in mu],
        "product": [float(x) for x in report.product],
        "arithmetic_mean": [float(x) for x in report.arithmetic_mean],
        "theta": cfg.bounds["theta"],
        "theta_samples": cfg.bounds["theta_samples"],
        "entries": entries,
        "min_margin": min_margin,
        "passed": passed,
    })
    print(f"wrote bounds_report.json to {out} (min margin {min_margin:.3e})")
    return 0 if passed else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qtraj",
        description="Quantum trajectory simulation and output spectra")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads (results are thread-count independent)")
        p.add_argument("--seed", type=int, help="master seed override")

    common(sub.add_parser("trajectories", help="dump trajectory CSVs + summary"))
    sp = sub.add_parser("spectrum", help="compute an output spectrum")
    common(sp)
    sp.add_argument("--route", choices=["mc", "analytic", "closed-form"],
                    required=True)
    fig = sub.add_parser("figures", help="emit baked-in figure data")
    fig.add_argument("figure", choices=["fig1", "fig2"])
    common(fig, config=False)
    common(sub.add_parser("bounds", help="check the spectral bounds"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "figures":
            return cmd_figures(args)
        cfg = load_config(args.config)
        if args.command == "trajectories":
            return cmd_trajectories(cfg, args)
        if args.command == "spectrum":
            return cmd_spectrum(cfg, args)
        if args.command == "bounds":
            return cmd_bounds(cfg, args)
        raise ValueError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
