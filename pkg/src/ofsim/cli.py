"""Command-line front end: flat key=value configs, experiment commands,
CSV emission.

Commands
--------
simulate        one closed-loop run -> trajectory.csv + manifest
sweep           recovery study over a list of epsilons -> recovery.csv
validate        plant/observer health checks, nonzero exit on failure
reproduce-fig1  four panel CSVs (output comparison per epsilon, internal
                state, Riccati solution, control effort) plus a standalone
                plot script

Exit codes: 0 success, 1 simulation/validation failure, 2 usage error.
All numeric output is plain decimal text with 15 significant digits;
identical configurations produce byte-identical CSV files.
"""

from __future__ import annotations

import argparse
import ast
import os
import shutil
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .controller import SaturationConfig, state_feedback_rollout
from .numerics import IntegrationError
from .observers import EhgoGains, EkfWeights, pd_monitor, validate_phi1
from .simulate import (
    RecoveryReport,
    SimConfig,
    SimulationError,
    Trajectory,
    default_saturation,
    epsilon_sweep,
    get_bundle,
    resolve_config,
    run_simulation,
    simulate_reduced,
)
from .systems import equilibrium_defect

#: Acceptance threshold for the finite-difference cross-check of phi1.
PHI1_TOLERANCE = 1e-3

_DEFAULT_SWEEP = (0.01, 0.005, 0.001)


class ConfigError(ValueError):
    """A configuration document could not be parsed or violates an
    invariant; the message names the offending line/key."""


# ---------------------------------------------------------------------------
# Flat key = value configuration documents
# ---------------------------------------------------------------------------

_SCALAR_KEYS = ("epsilon", "R", "sigma_hat0", "t_final", "step",
                "M_xi", "M_sigma", "kappa")
_VECTOR_KEYS = ("alpha", "eta0", "xi0", "eta_hat0", "xi_hat0")
_MATRIX_KEYS = ("Q", "P0")
_KNOWN_KEYS = frozenset(
    _SCALAR_KEYS + _VECTOR_KEYS + _MATRIX_KEYS
    + ("system", "mode", "y_substitution", "saturation_enabled",
       "record_stride")
)


def _parse_number(raw: str, key: str, line_no: int) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(
            f"line {line_no}: key {key!r}: malformed number {raw!r}"
        ) from None


def _parse_listlike(raw: str, key: str, line_no: int):
    try:
        if raw.startswith("["):
            value = ast.literal_eval(raw)
        else:
            value = [float(part) for part in raw.split(",")]
        return np.asarray(value, dtype=float)
    except (ValueError, SyntaxError):
        raise ConfigError(
            f"line {line_no}: key {key!r}: malformed value {raw!r}"
        ) from None


def _parse_bool(raw: str, key: str, line_no: int) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "on", "yes", "1"):
        return True
    if lowered in ("false", "off", "no", "0"):
        return False
    raise ConfigError(f"line {line_no}: key {key!r}: expected a boolean, got {raw!r}")


def parse_config(text: str) -> SimConfig:
    """Parse a flat ``key = value`` document into a fully resolved SimConfig.

    ``#`` starts a comment; unknown and duplicate keys are rejected with
    the offending line.  Missing keys fall back to the bundled example
    study's values, so the empty document is a valid configuration.
    """
    raw: dict[str, tuple[str, int]] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {line_no}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"line {line_no}: key {key!r} has no value")
        raw[key] = (value, line_no)

    def take(key):
        return raw.pop(key, (None, 0))

    values: dict[str, object] = {}
    for key in _SCALAR_KEYS:
        v, ln = take(key)
        if v is not None:
            values[key] = _parse_number(v, key, ln)
    for key in _VECTOR_KEYS:
        v, ln = take(key)
        if v is not None:
            arr = _parse_listlike(v, key, ln)
            if arr.ndim != 1:
                raise ConfigError(f"line {ln}: key {key!r}: expected a flat list")
            values[key] = arr
    for key in _MATRIX_KEYS:
        v, ln = take(key)
        if v is not None:
            values[key] = _parse_listlike(v, key, ln)

    v, ln = take("system")
    system = v if v is not None else "example"
    v, ln = take("mode")
    mode = v if v is not None else "output_feedback"
    if mode == "output":
        mode = "output_feedback"
    if mode not in ("reduced", "output_feedback"):
        raise ConfigError(f"line {ln}: key 'mode': expected reduced or "
                          f"output_feedback, got {mode!r}")
    v, ln = take("y_substitution")
    y_sub = None
    if v is not None and v.lower() != "auto":
        y_sub = _parse_bool(v, "y_substitution", ln)
    v, ln = take("saturation_enabled")
    sat_enabled = True if v is None else _parse_bool(v, "saturation_enabled", ln)
    v, ln = take("record_stride")
    record_stride = None
    if v is not None and v.lower() != "auto":
        try:
            record_stride = int(v)
        except ValueError:
            raise ConfigError(
                f"line {ln}: key 'record_stride': malformed integer {v!r}"
            ) from None

    try:
        bundle = get_bundle(system)
    except KeyError as exc:
        raise ConfigError(str(exc)) from None

    defaults = SimConfig()
    try:
        gains = EhgoGains(
            values.get("alpha", defaults.gains.alphas),
            values.get("epsilon", defaults.gains.epsilon),
        )
    except ValueError as exc:
        raise ConfigError(f"key 'alpha'/'epsilon': {exc}") from None
    try:
        weights = EkfWeights(
            values.get("Q", defaults.weights.q_matrix()),
            values.get("R", defaults.weights.R),
            values.get("P0", defaults.weights.p0_matrix()),
        )
    except ValueError as exc:
        raise ConfigError(f"key 'Q'/'R'/'P0': {exc}") from None

    eta0 = values.get("eta0", np.asarray(defaults.eta0))
    xi0 = values.get("xi0", np.asarray(defaults.xi0))
    m_xi = values.get("M_xi")
    m_sigma = values.get("M_sigma")
    kappa = values.get("kappa")
    try:
        if m_xi is None or m_sigma is None:
            suggestion = default_saturation(
                system,
                tuple(float(v) for v in np.atleast_1d(eta0)),
                tuple(float(v) for v in np.atleast_1d(xi0)),
                m_sigma,
            )
            m_xi = m_xi if m_xi is not None else suggestion.M_xi
            m_sigma = suggestion.M_sigma
        sat = SaturationConfig(M_xi=float(m_xi), M_sigma=float(m_sigma),
                               kappa=None if kappa is None else float(kappa))
    except ValueError as exc:
        raise ConfigError(f"key 'M_xi'/'M_sigma'/'kappa': {exc}") from None

    try:
        cfg = SimConfig(
            system=system,
            mode=mode,
            gains=gains,
            weights=weights,
            sat=sat,
            y_substitution=y_sub,
            saturation_enabled=sat_enabled,
            t_final=values.get("t_final", defaults.t_final),
            step=values.get("step"),
            record_stride=record_stride,
            eta0=eta0,
            xi0=xi0,
            eta_hat0=values.get("eta_hat0", np.asarray(defaults.eta_hat0)),
            xi_hat0=values.get("xi_hat0", np.asarray(defaults.xi_hat0)),
            sigma_hat0=values.get("sigma_hat0", defaults.sigma_hat0),
        )
        return resolve_config(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _fmt_float(v: float) -> str:
    return repr(float(v))


def _fmt_vector(values) -> str:
    return "[" + ", ".join(_fmt_float(v) for v in values) + "]"


def _fmt_matrix(rows) -> str:
    return "[" + ", ".join(_fmt_vector(row) for row in rows) + "]"


def config_echo(cfg: SimConfig) -> str:
    """Render a resolved configuration as a parseable document.

    ``parse_config(config_echo(cfg))`` reproduces ``cfg`` exactly.
    """
    cfg = resolve_config(cfg)
    lines = [
        f"system = {cfg.system}",
        f"mode = {cfg.mode}",
        f"epsilon = {_fmt_float(cfg.gains.epsilon)}",
        f"alpha = {_fmt_vector(cfg.gains.alphas)}",
        f"Q = {_fmt_matrix(cfg.weights.Q)}",
        f"R = {_fmt_float(cfg.weights.R)}",
        f"P0 = {_fmt_matrix(cfg.weights.P0)}",
        f"eta0 = {_fmt_vector(cfg.eta0)}",
        f"xi0 = {_fmt_vector(cfg.xi0)}",
        f"eta_hat0 = {_fmt_vector(cfg.eta_hat0)}",
        f"xi_hat0 = {_fmt_vector(cfg.xi_hat0)}",
        f"sigma_hat0 = {_fmt_float(cfg.sigma_hat0)}",
        f"M_xi = {_fmt_float(cfg.sat.M_xi)}",
        f"M_sigma = {_fmt_float(cfg.sat.M_sigma)}",
        f"kappa = {_fmt_float(cfg.sat.kappa)}",
        f"y_substitution = {'true' if cfg.y_substitution else 'false'}",
        f"saturation_enabled = {'true' if cfg.saturation_enabled else 'false'}",
        f"t_final = {_fmt_float(cfg.t_final)}",
        f"step = {_fmt_float(cfg.step)}",
        f"record_stride = {cfg.record_stride}",
    ]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# CSV and manifest emission
# ---------------------------------------------------------------------------


def _trajectory_columns(traj: Trajectory):
    m = traj.eta.shape[1]
    r = traj.xi.shape[1]
    names = ["t"]
    names += [f"eta{i + 1}" for i in range(m)]
    names += [f"xi{i + 1}" for i in range(r)]
    names += ["y", "u"]
    names += [f"eta_hat{i + 1}" for i in range(m)]
    names += [f"xi_hat{i + 1}" for i in range(r)]
    names += ["sigma_hat"]
    names += [f"P{i + 1}{j + 1}" for i in range(m) for j in range(m)]
    names += [f"eta_tilde{i + 1}" for i in range(m)]
    names += ["V2", "W"]
    n = len(traj.times)
    data = np.column_stack([
        traj.times,
        traj.eta, traj.xi,
        traj.y, traj.u,
        traj.eta_hat, traj.xi_hat,
        traj.sigma_hat,
        traj.P.reshape(n, m * m),
        traj.eta_tilde,
        traj.V2, traj.W,
    ]) if n else np.empty((0, len(names)))
    return names, data


def write_csv(obj, path) -> None:
    """Write a Trajectory or RecoveryReport as UTF-8 CSV, 15 significant
    digits, newline-terminated."""
    if isinstance(obj, Trajectory):
        names, data = _trajectory_columns(obj)
    elif isinstance(obj, RecoveryReport):
        names = ["epsilon", "sup_dev_theta", "sup_dev_eta_tilde"]
        data = np.column_stack([
            np.asarray(obj.epsilons, dtype=float),
            np.asarray(obj.sup_dev_theta, dtype=float),
            np.asarray(obj.sup_dev_eta_tilde, dtype=float),
        ]) if obj.epsilons else np.empty((0, 3))
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__} to CSV")
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(",".join(names) + "\n")
        for row in data:
            handle.write(",".join(f"{v:.15g}" for v in row) + "\n")


def manifest_text(command: str, cfg: SimConfig, outputs, duration: float,
                  extra: dict | None = None) -> str:
    """Flat key = value record of a command invocation: resolved config
    (prefixed ``config.``), emitted files, wall-clock duration."""
    lines = [
        f"command = {command}",
        f"version = {__version__}",
        f"duration_seconds = {duration:.3f}",
        f"outputs = {', '.join(outputs)}",
    ]
    for key, value in (extra or {}).items():
        lines.append(f"{key} = {value}")
    lines += ["config." + line for line in config_echo(cfg).splitlines()]
    return "\n".join(lines) + "\n"


def parse_manifest_config(text: str) -> SimConfig:
    """Recover the SimConfig echoed into a manifest file."""
    config_lines = [
        line[len("config."):]
        for line in text.splitlines()
        if line.startswith("config.")
    ]
    return parse_config("\n".join(config_lines))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _load_cfg(args) -> SimConfig:
    if getattr(args, "config", None):
        text = Path(args.config).read_text(encoding="utf-8")
    else:
        text = ""
    cfg = parse_config(text)
    overrides = {}
    mode = getattr(args, "mode", None)
    if mode:
        overrides["mode"] = "output_feedback" if mode == "output" else mode
        overrides["step"] = None
        overrides["record_stride"] = None
    if getattr(args, "no_saturation", False):
        overrides["saturation_enabled"] = False
    if overrides:
        from dataclasses import replace
        cfg = resolve_config(replace(cfg, **overrides))
    return cfg


def _parse_epsilons(raw: str):
    try:
        eps = [float(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"--epsilons: malformed list {raw!r}") from None
    if not eps:
        raise ConfigError("--epsilons: empty list")
    if any(e <= 0 for e in eps):
        raise ConfigError("--epsilons: values must be positive")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("--epsilons: values must be strictly descending")
    return eps


def _cmd_simulate(args, cfg: SimConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    traj = run_simulation(cfg)
    write_csv(traj, out / "trajectory.csv")
    duration = time.perf_counter() - started
    files = ["trajectory.csv", "manifest.txt"]
    (out / "manifest.txt").write_text(
        manifest_text("simulate", cfg, files, duration), encoding="utf-8")
    print(f"wrote {out / 'trajectory.csv'} ({len(traj)} records, "
          f"{duration:.2f}s)")
    return 0


def _cmd_sweep(args, cfg: SimConfig) -> int:
    epsilons = _parse_epsilons(args.epsilons)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    report = epsilon_sweep(cfg, epsilons)
    write_csv(report, out / "recovery.csv")
    duration = time.perf_counter() - started
    files = ["recovery.csv", "manifest.txt"]
    (out / "manifest.txt").write_text(
        manifest_text("sweep", cfg, files, duration,
                      extra={"epsilons": args.epsilons,
                             "transient_cutoff": report.transient_cutoff}),
        encoding="utf-8")
    for eps, dev in zip(report.epsilons, report.sup_dev_theta):
        print(f"epsilon={eps:g}: sup deviation of plant state = {dev:.6g}")
    return 0


def _cmd_validate(args, cfg: SimConfig) -> int:
    bundle = get_bundle(cfg.system)
    failures = 0

    def check(name: str, ok: bool, detail: str) -> None:
        nonlocal failures
        status = "PASS" if ok else "FAIL"
        print(f"CHECK {name}: {status} ({detail})")
        if not ok:
            failures += 1

    defect = equilibrium_defect(bundle.system)
    check("origin-equilibrium", defect <= 1e-12, f"defect={defect:.3e}")

    gamma0 = abs(float(bundle.control.gamma_fn(
        np.zeros(bundle.system.n_internal), np.zeros(bundle.system.rho))))
    check("feedback-vanishes-at-origin", gamma0 <= 1e-12, f"|gamma(0,0)|={gamma0:.3e}")

    probe = state_feedback_rollout(
        bundle.system, bundle.control, cfg.eta0, cfg.xi0,
        t_final=1.0, step=1e-4)
    phi1_err = validate_phi1(bundle.system, probe)
    check("phi1-matches-finite-difference", phi1_err < PHI1_TOLERANCE,
          f"max discrepancy={phi1_err:.3e}, tolerance={PHI1_TOLERANCE:g}")

    try:
        from dataclasses import replace
        monitor_cfg = replace(cfg, mode="reduced", step=None,
                              record_stride=None,
                              t_final=min(cfg.t_final, 5.0))
        traj = simulate_reduced(monitor_cfg)
        lam_min = min(pd_monitor(P).lambda_min for P in traj.P)
        defect = max(pd_monitor(P).symmetric_defect for P in traj.P)
        check("riccati-positive-definite", lam_min > 0.0,
              f"min eigenvalue={lam_min:.3e} over [0, {monitor_cfg.t_final:g}]s")
        check("riccati-symmetric", defect <= 1e-9, f"max defect={defect:.3e}")
    except (IntegrationError, SimulationError) as exc:
        check("riccati-positive-definite", False, str(exc))

    if failures:
        print(f"{failures} check(s) failed")
        return 1
    print("all checks passed")
    return 0


_PLOT_SCRIPT = """\
#!/usr/bin/env python3
\"\"\"Render the four panels from the CSVs next to this script.

Needs only numpy and matplotlib; run from the directory containing the
panel files.
\"\"\"

import csv
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(name):
    with open(Path(__file__).parent / name, newline="") as handle:
        rows = list(csv.reader(handle))
    header = rows[0]
    data = {column: [] for column in header}
    for row in rows[1:]:
        for column, cell in zip(header, row):
            data[column].append(float(cell))
    return data


panel_a = load("fig1a_output_comparison.csv")
panel_b = load("fig1b_internal_state.csv")
panel_c = load("fig1c_riccati.csv")
panel_d = load("fig1d_control.csv")

fig, axes = plt.subplots(2, 2, figsize=(10, 7))

ax = axes[0, 0]
for column in panel_a:
    if column == "t":
        continue
    style = "--" if column == "y_reduced" else "-"
    ax.plot(panel_a["t"], panel_a[column], style, label=column)
ax.set_title("(a) output vs reduced system")
ax.set_xlabel("t [s]")
ax.legend(fontsize=8)

ax = axes[0, 1]
for column in panel_b:
    if column == "t":
        continue
    ax.plot(panel_b["t"], panel_b[column], label=column)
ax.set_title("(b) internal state")
ax.set_xlabel("t [s]")

ax = axes[1, 0]
for column in panel_c:
    if column == "t":
        continue
    ax.plot(panel_c["t"], panel_c[column], label=column)
ax.set_title("(c) Riccati solution")
ax.set_xlabel("t [s]")

ax = axes[1, 1]
ax.plot(panel_d["t"], panel_d["u"])
ax.set_title("(d) control effort")
ax.set_xlabel("t [s]")

fig.tight_layout()
fig.savefig(Path(__file__).parent / "fig1.png", dpi=150)
print("wrote fig1.png")
"""


def _cmd_reproduce_fig1(args, cfg: SimConfig) -> int:
    epsilons = _parse_epsilons(args.epsilons) if args.epsilons else list(_DEFAULT_SWEEP)
    out = Path(args.out)
    if out.exists() and any(out.iterdir()):
        print(f"error: output directory {out} exists and is not empty",
              file=sys.stderr)
        return 2
    stage = out.parent / (out.name + ".staging")
    if stage.exists():
        shutil.rmtree(stage)
    stage.mkdir(parents=True)
    started = time.perf_counter()
    from dataclasses import replace
    try:
        red_cfg = replace(cfg, mode="reduced", step=None, record_stride=None)
        traj_red = simulate_reduced(red_cfg)
        of_runs = {}
        for eps in epsilons:
            of_cfg = replace(cfg, mode="output_feedback",
                             gains=EhgoGains(cfg.gains.alphas, eps),
                             step=None, record_stride=None)
            of_runs[eps] = run_simulation(of_cfg)
        main_eps = cfg.gains.epsilon
        if main_eps in of_runs:
            traj_main = of_runs[main_eps]
        else:
            traj_main = run_simulation(replace(cfg, mode="output_feedback",
                                               step=None, record_stride=None))

        header = ["t", "y_reduced"] + [f"y_eps_{eps:g}" for eps in epsilons]
        columns = [traj_red.times, traj_red.y] + [of_runs[e].y for e in epsilons]
        with open(stage / "fig1a_output_comparison.csv", "w",
                  encoding="utf-8", newline="") as handle:
            handle.write(",".join(header) + "\n")
            for row in zip(*columns):
                handle.write(",".join(f"{v:.15g}" for v in row) + "\n")

        m = traj_main.eta.shape[1]
        _write_panel(stage / "fig1b_internal_state.csv",
                     ["t"] + [f"eta{i + 1}" for i in range(m)],
                     np.column_stack([traj_main.times, traj_main.eta]))
        _write_panel(stage / "fig1c_riccati.csv",
                     ["t"] + [f"P{i + 1}{j + 1}" for i in range(m) for j in range(m)],
                     np.column_stack([traj_main.times,
                                      traj_main.P.reshape(len(traj_main), m * m)]))
        _write_panel(stage / "fig1d_control.csv", ["t", "u"],
                     np.column_stack([traj_main.times, traj_main.u]))
        (stage / "plot_fig1.py").write_text(_PLOT_SCRIPT, encoding="utf-8")

        duration = time.perf_counter() - started
        files = ["fig1a_output_comparison.csv", "fig1b_internal_state.csv",
                 "fig1c_riccati.csv", "fig1d_control.csv", "plot_fig1.py",
                 "manifest.txt"]
        (stage / "manifest.txt").write_text(
            manifest_text("reproduce-fig1", cfg, files, duration,
                          extra={"epsilons": ",".join(f"{e:g}" for e in epsilons)}),
            encoding="utf-8")
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        raise
    if out.exists():
        out.rmdir()  # known empty from the check above
    os.replace(stage, out)
    print(f"wrote Fig. 1 panel data to {out}")
    return 0


def _write_panel(path, names, data) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(",".join(names) + "\n")
        for row in data:
            handle.write(",".join(f"{v:.15g}" for v in row) + "\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ofsim",
        description="Output-feedback stabilization experiments: high-gain "
                    "observer cascaded with an extended Kalman filter.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", help="path to a key = value config file")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seedless", action="store_true",
                       help="reserved; rejected (this tool has no randomness)")

    p = sub.add_parser("simulate", help="run one closed loop, write the trajectory")
    common(p)
    p.add_argument("--mode", choices=["reduced", "output", "output_feedback"])
    p.add_argument("--no-saturation", action="store_true",
                   help="disable all saturations (peaking demonstration)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="recovery study over a list of epsilons")
    common(p)
    p.add_argument("--epsilons", required=True,
                   help="comma-separated, strictly descending, e.g. 0.01,0.005,0.001")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("validate", help="plant and observer health checks")
    common(p, needs_out=False)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("reproduce-fig1",
                       help="emit the four panel CSVs plus a plot script")
    common(p)
    p.add_argument("--epsilons",
                   help="comma-separated, strictly descending "
                        "(default 0.01,0.005,0.001)")
    p.set_defaults(func=_cmd_reproduce_fig1)
    return parser


def run_command(argv) -> int:
    """Dispatch one CLI invocation; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:
        code = exc.code
        return int(code) if isinstance(code, int) else (0 if code is None else 2)
    if getattr(args, "seedless", False):
        print("error: --seedless is reserved and rejected; this tool uses no "
              "randomness", file=sys.stderr)
        return 2
    try:
        cfg = _load_cfg(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (IntegrationError, SimulationError, ValueError) as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
