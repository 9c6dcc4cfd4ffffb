"""Batch command line: ``qphase run <config> [--check] [--out DIR]`` and ``qphase validate``.

Exit codes: 0 success, 2 configuration error, 3 runtime abort, 4 failed check.
"""
from __future__ import annotations

import argparse
import logging
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy

from . import __version__
from .analysis import fringe_extract, uncertainty_corpus, uncertainty_product, virial_report
from .config import ConfigError, RunConfig, Scenario, parse_config
from .core import (
    DegenerateStateError,
    HamiltonianModel,
    PhaseWaveFunction,
    build_grid,
    marginal_q,
    norm_squared,
)
from .dynamics import (
    BoundaryLeakError,
    OutOfDomainError,
    evolve,
    momentum_from_velocity,
    relativistic_phase_velocity,
)
from .oracle import (
    compare_densities,
    config_norm_squared,
    cn_evolve,
    gaussian_config_packet,
    ho_ground_density,
)
from .scenarios import (
    SlitSpec,
    commensurate_grid,
    gaussian_packet,
    interference_pattern,
    plane_wave,
    two_slit_superpose,
)
from .stationary import HOStationaryState, ho_wavefunction, quantize_ho, stationary_residual

log = logging.getLogger("qphase")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CHECK = 0, 2, 3, 4

# edge-mass abort threshold for localized states
LEAK_LIMIT = 1e-4

RELATIVISTIC_SPEEDS = (0.001, 0.005, 0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8,
                       0.9, 0.95, 0.99, 0.999, 0.9999)


class RuntimeAbort(RuntimeError):
    pass


# -- output --------------------------------------------------------------------------

class Writer:
    def __init__(self, out_dir: Path, precision: Optional[int]):
        self.dir = out_dir
        self.precision = precision
        self.dir.mkdir(parents=True, exist_ok=True)

    def fmt(self, x) -> str:
        if isinstance(x, (bool, np.bool_)):
            return "1" if x else "0"
        if isinstance(x, (int, np.integer)):
            return str(int(x))
        if isinstance(x, str):
            return x
        x = float(x)
        if x == 0.0:
            x = 0.0  # drop the sign of -0.0
        if self.precision is None:
            return repr(x)
        return format(x, f".{self.precision}g")

    def csv(self, name: str, header: list[str], rows) -> None:
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(self.fmt(v) for v in row))
        (self.dir / name).write_text("\n".join(lines) + "\n", encoding="utf-8")

    def columns(self, name: str, header: list[str], cols) -> None:
        cols = [np.ravel(c) for c in cols]
        fmt = self.fmt
        body = [",".join(fmt(v) for v in row) for row in zip(*[c.tolist() for c in cols])]
        (self.dir / name).write_text("\n".join([",".join(header)] + body) + "\n", encoding="utf-8")

    def fields(self, k: int, psi: PhaseWaveFunction) -> None:
        Q, P = psi.grid.mesh()
        v = psi.values
        self.columns(f"fields_t{k}.csv", ["q", "p", "re_psi", "im_psi", "density"],
                     [Q, P, v.real, v.imag, psi.density])
        self.columns(f"marginal_q_t{k}.csv", ["q", "rho_q"], [psi.grid.q, marginal_q(psi)])


@dataclass
class Outcome:
    results: list[tuple[str, object]] = field(default_factory=list)
    checks: list[tuple[str, bool]] = field(default_factory=list)

    def add(self, key, value):
        self.results.append((key, value))

    def check(self, name, ok):
        self.checks.append((name, bool(ok)))


# -- scenario runners ------------------------------------------------------------------

def _grid(cfg: RunConfig):
    g = cfg.section("grid")
    return build_grid(g["q_min"], g["q_max"], g["p_min"], g["p_max"], g["n_q"], g["n_p"],
                      g["boundary_mode"])


def _evolve_and_record(cfg, w: Writer, psi0, H, out: Outcome, leak: bool, extra=None):
    t = cfg.section("time")
    metrics = []
    extra = extra or {}

    def snap(k, time, state):
        w.fields(k, state)

    try:
        rec = evolve(psi0, H, t["t_final"], t["dt"], snapshot_every=t["snapshot_every"],
                     method=cfg["run.method"], leak_limit=LEAK_LIMIT if leak else None,
                     on_snapshot=snap)
    except (BoundaryLeakError, OutOfDomainError) as exc:
        raise RuntimeAbort(str(exc)) from exc
    for k, time, n2 in zip(rec.norm_steps, rec.norm_times, rec.norms):
        metrics.append([k, time, n2])
    names = list(extra)
    if names:
        snaps = dict(zip(rec.step_indices, rec.snapshots))
        for row in metrics:
            st = snaps.get(row[0])
            row.extend(extra[n](st) if st is not None else "" for n in names)
    w.csv("metrics.csv", ["step", "time", "norm2"] + names, metrics)
    out.add("steps", rec.steps)
    out.add("dt", rec.dt)
    out.add("norm_drift", rec.norm_drift())
    out.check("norm_drift <= 1e-6", rec.norm_drift() <= 1e-6)
    return rec


def _means(psi):
    Q, P = psi.grid.mesh()
    n2 = norm_squared(psi)
    w = psi.grid.weights() * psi.density / n2
    return float(np.sum(w * Q)), float(np.sum(w * P))


def run_free_wave(cfg, w, out):
    g = _grid(cfg)
    phys = cfg.section("physics")
    hbar, m = phys["hbar"], phys["m"]
    if g.periodic_q:
        # snap rows so every row holds whole wavelengths on the periodic axis
        dp = 2 * np.pi * hbar / (g.q_max - g.q_min)
        first = int(np.round(g.p_min / dp))
        g = commensurate_grid(g.q_min, g.q_max, g.n_q, first, g.n_p, hbar)
        out.add("p_rows_snapped_to", dp)
    psi0 = plane_wave(phys["p0"], g, hbar, m=m)
    rec = _evolve_and_record(cfg, w, psi0, HamiltonianModel.free(m), out, leak=False)
    exact = plane_wave(phys["p0"], g, hbar, t=rec.steps * rec.dt, m=m)
    err = float(np.max(np.abs(rec.final.values - exact.values)))
    out.add("max_pointwise_error", err)
    out.check("pointwise error <= 1e-4", err <= 1e-4)


def run_free_packet(cfg, w, out):
    g = _grid(cfg)
    ph = cfg.section("physics")
    psi0 = gaussian_packet(ph["q0"], ph["p0"], ph["sigma_q"], ph["sigma_p"], g, ph["hbar"])
    rec = _evolve_and_record(cfg, w, psi0, HamiltonianModel.free(ph["m"]), out, leak=True,
                             extra={"mean_q": lambda s: _means(s)[0], "mean_p": lambda s: _means(s)[1]})
    mq0 = _means(psi0)[0]
    mq1 = _means(rec.final)[0]
    t = rec.steps * rec.dt
    out.add("centroid_shift", mq1 - mq0)
    out.add("centroid_shift_expected", ph["p0"] * t / (2 * ph["m"]))


def run_harmonic_evolve(cfg, w, out):
    g = _grid(cfg)
    ph = cfg.section("physics")
    H = HamiltonianModel.harmonic(ph["m"], ph["omega"])
    psi0 = gaussian_packet(ph["q0"], ph["p0"], ph["sigma_q"], ph["sigma_p"], g, ph["hbar"])
    Q, P = g.mesh()
    Hq = H.H(Q, P)
    rec = _evolve_and_record(cfg, w, psi0, H, out, leak=True,
                             extra={"mean_q": lambda s: _means(s)[0], "mean_p": lambda s: _means(s)[1],
                                    "mean_H": lambda s: float(np.sum(s.grid.weights() * s.density * Hq)
                                                              / norm_squared(s))})
    diff = rec.final.values - psi0.values
    out.add("l2_distance_to_initial", float(np.sqrt(np.sum(g.weights() * np.abs(diff) ** 2))))
    out.add("flow_period", 4 * np.pi / ph["omega"])


def _ho_state(cfg):
    ph = cfg.section("physics")
    return HOStationaryState(cfg["run.n"], cfg["run.branch"], ph["m"], ph["omega"], ph["hbar"],
                             ph["beta"], cfg["run.form"])


def run_harmonic_stationary(cfg, w, out):
    g = _grid(cfg)
    st = _ho_state(cfg)
    psi = ho_wavefunction(st, g)
    H = st.hamiltonian
    w.fields(0, psi)
    res = stationary_residual(psi, H, st.energy)
    vr = virial_report(psi, H)
    un = uncertainty_product(psi)
    dens = compare_densities(marginal_q(psi), ho_ground_density(g.q, st.m, st.omega, st.hbar), g.q)
    w.csv("metrics.csv", ["step", "time", "norm2", "energy", "residual", "kinetic", "virial",
                          "uncertainty_product"],
          [[0, 0.0, norm_squared(psi), st.energy, res, vr.kinetic, vr.virial, un.product]])
    out.add("energy", st.energy)
    out.add("nbar", st.nbar)
    out.add("stationary_residual", res)
    out.add("kinetic", vr.kinetic)
    out.add("virial", vr.virial)
    out.add("virial_ratio", vr.ratio)
    out.add("uncertainty_product", un.product)
    out.add("marginal_vs_ground_density_linf", dens.linf)
    if st.form.value == "exp":
        out.check("virial equality within 1e-5", vr.ratio is not None and abs(vr.kinetic - vr.virial) <= 1e-5)
    if abs(st.beta - st.hbar * st.omega) <= 1e-15 * st.beta:
        out.check("q-marginal matches ground density within 1e-8", dens.linf <= 1e-8)


def run_quantize(cfg, w, out):
    ph = cfg.section("physics")
    lv = quantize_ho(cfg["run.branch"], cfg["run.n_max"], ph["m"], ph["omega"], ph["hbar"])
    first = 0 if lv.branch.value == "cosine" else 1
    rows = [[first + i, e, a, r] for i, (e, a, r) in
            enumerate(zip(lv.energies, lv.turning_points, lv.boundary_ratios))]
    w.csv("levels.csv", ["n", "energy", "turning_point", "boundary_ratio"], rows)
    w.csv("metrics.csv", ["step", "time", "norm2", "energy", "boundary_ratio"],
          [[i, 0.0, 1.0, e, r] for i, (_, e, _, r) in enumerate(rows)])
    out.add("branch", lv.branch.value)
    out.add("energies", " ".join(w.fmt(e) for e in lv.energies))
    out.add("max_boundary_ratio", max(lv.boundary_ratios, default=0.0))
    out.check("turning-point ratio <= 1e-10", lv.verified)


def run_two_slit(cfg, w, out):
    g = _grid(cfg)
    ph = cfg.section("physics")
    spec = SlitSpec(ph["slit_d"], ph["slit_sigma"], ph["p0"], ph["slit_L"], ph["sigma_p"])
    H = HamiltonianModel.free(ph["m"])
    states = two_slit_superpose(spec, g, ph["hbar"])
    t_screen = spec.screen_time(ph["m"])
    dt = cfg["time.dt"]
    w.fields(0, states.psi_sup)
    try:
        pat = interference_pattern(states, H, t_screen, dt=min(dt, t_screen),
                                   leak_limit=LEAK_LIMIT, method=cfg["run.method"])
    except BoundaryLeakError as exc:
        raise RuntimeAbort(str(exc)) from exc
    n_steps = max(1, int(round(t_screen / min(dt, t_screen))))
    w.fields(n_steps, pat.states.psi_sup)
    w.columns("pattern.csv", ["q", "rho_q", "envelope", "cross"], [pat.q, pat.pattern, pat.envelope, pat.cross])
    w.csv("metrics.csv", ["step", "time", "norm2"],
          [[0, 0.0, norm_squared(states.psi_sup)], [n_steps, t_screen, norm_squared(pat.states.psi_sup)]])
    fr = fringe_extract(pat.pattern, pat.q, background=pat.envelope)
    pred = spec.fringe_spacing(t_screen, ph["m"], ph["hbar"])
    out.add("screen_time", t_screen)
    out.add("fringe_count", len(fr.maxima))
    out.add("fringe_spacing", fr.spacing)
    out.add("fringe_spacing_predicted", pred)
    out.add("visibility", fr.visibility)
    out.check("fringe spacing within 5%", fr.spacing is not None and abs(fr.spacing / pred - 1) <= 0.05)


def run_uncertainty_suite(cfg, w, out):
    g = _grid(cfg)
    ph = cfg.section("physics")
    rows = []
    worst = np.inf
    for name, psi in uncertainty_corpus(g, ph["hbar"], ph["m"], ph["omega"]):
        u = uncertainty_product(psi)
        rows.append([name, u.var_q, u.var_p, u.product, u.margin])
        worst = min(worst, u.margin)
    w.csv("uncertainty.csv", ["state", "var_q", "var_p", "product", "margin"], rows)
    w.csv("metrics.csv", ["step", "time", "norm2", "state", "product"],
          [[i, 0.0, 1.0, r[0], r[3]] for i, r in enumerate(rows)])
    out.add("states", len(rows))
    out.add("min_margin", worst)
    out.check("product >= hbar/2 - 1e-6 on every state", worst >= -1e-6)


def run_relativistic_table(cfg, w, out):
    c = cfg["physics.c"]
    m0 = cfg["physics.m"]
    rows = []
    prev = -np.inf
    monotone, bounded = True, True
    for beta in RELATIVISTIC_SPEEDS:
        p = momentum_from_velocity(beta * c, m0, c)
        vp = relativistic_phase_velocity(p, m0, c)
        rows.append([beta, vp / c, vp / (beta * c)])
        monotone &= vp > prev
        bounded &= vp <= c
        prev = vp
    w.csv("relativistic_table.csv", ["v_over_c", "v_phase_over_c", "v_phase_over_v"], rows)
    w.csv("metrics.csv", ["step", "time", "norm2", "v_over_c", "v_phase_over_c"],
          [[i, 0.0, 1.0, r[0], r[1]] for i, r in enumerate(rows)])
    at06 = relativistic_phase_velocity(momentum_from_velocity(0.6 * c, m0, c), m0, c) / c
    out.add("v_phase_at_0.6c", at06)
    out.check("v_phase(0.6c) = c/3 within 1e-12", abs(at06 - 1 / 3) <= 1e-12)
    out.check("monotone and below c", monotone and bounded)
    slow = [r[2] for r in rows if r[0] <= 0.05]
    out.check("v_phase/v within 1% of 1/2 for v <= 0.05c", all(abs(s - 0.5) <= 0.005 for s in slow))


def run_oracle_compare(cfg, w, out):
    g = _grid(cfg)
    ph = cfg.section("physics")
    hbar, m, omega = ph["hbar"], ph["m"], ph["omega"]
    st = HOStationaryState(0, "cosine", m, omega, hbar)
    psi = ho_wavefunction(st, g)
    rho_ps = marginal_q(psi)
    rho_or = ho_ground_density(g.q, m, omega, hbar)
    d_ho = compare_densities(rho_ps, rho_or, g.q)
    w.fields(0, psi)
    # free packet: phase space vs configuration space
    t = cfg.section("time")
    rec = evolve(gaussian_packet(ph["q0"], ph["p0"], ph["sigma_q"], hbar / (2 * ph["sigma_q"]), g, hbar),
                 HamiltonianModel.free(m), t["t_final"], t["dt"], method=cfg["run.method"])
    n_steps = rec.steps
    cpsi = gaussian_config_packet(g.q, ph["q0"], ph["p0"], ph["sigma_q"], hbar, m)
    cfin = cn_evolve(cpsi, np.zeros_like(g.q), rec.dt, n_steps)
    rho_cn = cfin.density
    d_free = compare_densities(marginal_q(rec.final), rho_cn, g.q)
    w.columns("compare.csv", ["q", "rho_phase_space_ho", "rho_oracle_ho", "rho_phase_space_free",
                              "rho_oracle_free"], [g.q, rho_ps, rho_or, marginal_q(rec.final), rho_cn])
    cn_drift = abs(config_norm_squared(cfin) - config_norm_squared(cpsi))
    w.csv("metrics.csv", ["step", "time", "norm2", "cn_norm2"],
          [[0, 0.0, rec.norms[0], config_norm_squared(cpsi)],
           [n_steps, n_steps * rec.dt, rec.norms[-1], config_norm_squared(cfin)]])
    out.add("ho_marginal_linf", d_ho.linf)
    out.add("free_centroid_difference", d_free.centroid_difference)
    out.add("free_centroid_difference_expected", ph["p0"] * n_steps * rec.dt / (2 * m))
    out.add("cn_norm_drift", cn_drift)
    out.check("HO marginal vs oracle L-inf <= 1e-8", d_ho.linf <= 1e-8)
    out.check("CN norm drift <= 1e-10", cn_drift <= 1e-10)


RUNNERS: dict[Scenario, Callable] = {
    Scenario.FREE_WAVE: run_free_wave,
    Scenario.FREE_PACKET: run_free_packet,
    Scenario.HARMONIC_EVOLVE: run_harmonic_evolve,
    Scenario.HARMONIC_STATIONARY: run_harmonic_stationary,
    Scenario.QUANTIZE: run_quantize,
    Scenario.TWO_SLIT: run_two_slit,
    Scenario.UNCERTAINTY_SUITE: run_uncertainty_suite,
    Scenario.RELATIVISTIC_TABLE: run_relativistic_table,
    Scenario.ORACLE_COMPARE: run_oracle_compare,
}


def _summary(cfg: RunConfig, w: Writer, out: Outcome, check: bool) -> None:
    lines = [f"scenario = {cfg.scenario.value}", "", "[results]"]
    lines += [f"{k} = {w.fmt(v) if v is not None else 'undefined'}" for k, v in out.results]
    lines += ["", "[checks]"]
    lines += [f"{name} = {'pass' if ok else 'fail'}" for name, ok in out.checks]
    if check:
        lines.append(f"overall = {'pass' if all(ok for _, ok in out.checks) else 'fail'}")
    lines += ["", "[versions]", f"qphase = {__version__}", f"numpy = {np.__version__}",
              f"scipy = {scipy.__version__}", f"python = {platform.python_version()}"]
    lines += ["", "[config]"] + cfg.echo()
    (w.dir / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def run(cfg: RunConfig, check: bool = False, out_dir: Optional[str] = None) -> int:
    w = Writer(Path(out_dir or cfg["output.directory"]), cfg["output.precision"])
    out = Outcome()
    try:
        RUNNERS[cfg.scenario](cfg, w, out)
    except RuntimeAbort as exc:
        print(f"qphase: run aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (DegenerateStateError, ValueError) as exc:
        print(f"qphase: run aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _summary(cfg, w, out, check)
    if check:
        failed = [name for name, ok in out.checks if not ok]
        for name in failed:
            print(f"qphase: check failed: {name}", file=sys.stderr)
        if failed:
            return EXIT_CHECK
    return EXIT_OK


def _load(path: str) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError([]) from exc
    return parse_config(text)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="qphase", description="phase-space wave-function engine")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario")
    r.add_argument("config")
    r.add_argument("--check", action="store_true", help="exit 4 when a scenario check fails")
    r.add_argument("--out", help="output directory (overrides output.directory)")
    v = sub.add_parser("validate", help="parse and validate a config")
    v.add_argument("config")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        print(f"qphase: cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        for issue in exc.issues:
            print(f"{args.config}: {issue}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(f"{args.config}: ok ({cfg.scenario.value})")
        return EXIT_OK
    return run(cfg, check=args.check, out_dir=args.out)


if __name__ == "__main__":
    sys.exit(main())
