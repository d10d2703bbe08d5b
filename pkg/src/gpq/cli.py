"""The ``gpq`` command line: five scenario commands over one config format.

    gpq verify    --config run.cfg    closed-form-vs-quadrature consistency suite
    gpq spectrum  --config run.cfg    linearized pencil eigenvalues + node counts
    gpq evolve    --config run.cfg    time integration with a conserved-quantity CSV
    gpq modulate  --config run.cfg    synthetic-snapshot round-trip parameter fit
    gpq stability --config run.cfg    perturbed-kink experiment + report

``--config`` may be repeated; ``--jobs k`` fans the configs out over
processes (each scenario itself runs sequentially).  Outputs land in the
directory picked by --out > $GPQ_OUT > output.dir and are plot-ready text:
a CSV time series with the fixed header ``t,c,...,d0`` (floats printed as
%.16e so identical configs reproduce byte-identical files), plain-text
snapshots, and a summary.json in which every scalar carries a provenance
label naming how it was obtained (config | closed_form | quadrature |
eigensolve | fit | measured | pinned); docs/output-schema.md documents the
layout.  Exit codes: 0 pass, 1 a reported check failed, 2 bad usage or
config, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from gpq.config import RunConfig, config_echo, load_config, resolve_out_dir
from gpq.errors import (
    BranchResolutionFailure,
    ConfigError,
    DomainError,
    EigenConvergenceFailure,
    NoConvergence,
    NonFiniteField,
    PicardDivergence,
    SingularModulationMatrix,
    UnwrapAmbiguity,
    VacuumViolation,
)
from gpq.evolution import SchemeConfig, evolve, load_snapshot, save_snapshot
from gpq.functionals import (
    distance_dc,
    energy_e2,
    mod_pi_distance,
    modified_momentum,
)
from gpq.grid import integrate, make_grid
from gpq.modulation import (
    ModulationState,
    family_profile_at,
    fit,
    resolve_family,
)
from gpq.solitons import (
    black_energy,
    black_profile,
    black_profile_at,
    closed_forms,
    dark_derivative,
    dark_profile,
    dark_profile_at,
    eta_weight,
    lemma_quadrature_identity,
    one_minus_modsq,
    resolved_dark,
    residuals,
    t_continued,
    weight_q,
)
from gpq.spectral import (
    assemble_pencil,
    extrapolated_spectrum,
    sign_changes,
    solve_lowest,
)

CSV_HEADER = "t,c,a,theta,mass,p_classical,p_modified,E1,E2,z_H0,d0"

# Observer/output cadence in time units: one CSV row (and one modulation
# fit, where the observer runs) per interval.
EVOLVE_SAMPLE_T = 0.01
STABILITY_SAMPLE_T = 0.1

# Pinned reference values for the spectrum command (Richardson-extrapolated
# over N in {1025, 2049, 4097}; see the spectral module tests).
SIGMA2_PIN = 3.3573694961
LAMBDA2_PIN = 0.2705037406

# Pinned rate constant for the stability report.  Measured maxima of
# (|a'| + |theta'|)/eps over T = 20 runs: 0.61, 0.83, 0.94 across seeds
# 1234, 7, 99, and exactly linear in eps over eps in {2e-3, 5e-3, 1e-2}
# (identical prefactor at N = 2049 and N = 4097), so 2.0 holds with a
# twofold margin.
STABILITY_RATE_K = 2.0

_NUMERICAL_ERRORS = (
    BranchResolutionFailure,
    DomainError,
    EigenConvergenceFailure,
    NoConvergence,
    NonFiniteField,
    PicardDivergence,
    SingularModulationMatrix,
    UnwrapAmbiguity,
    VacuumViolation,
    np.linalg.LinAlgError,
)


# ---------------------------------------------------------------------------
# output plumbing
# ---------------------------------------------------------------------------

def _fmt(v):
    """One float, 17 significant digits, scientific, locale-independent."""
    return f"{v:.16e}"


def _cell(v):
    return "" if v is None else _fmt(v)


def write_series_csv(path, rows):
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def _unwrap_numpy(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_json(path, obj):
    with open(path, "w", encoding="ascii", newline="") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False,
                  default=_unwrap_numpy)
        fh.write("\n")


def scalar(value, provenance):
    """A reported scalar plus the label for how it was obtained."""
    return {"value": value, "provenance": provenance}


@dataclass(frozen=True)
class Check:
    """One pass/fail line: a nonnegative-unless-noted defect vs a tolerance."""

    name: str
    value: float
    tol: float
    provenance: str

    @property
    def passed(self):
        return self.value <= self.tol

    def as_json(self):
        return {"name": self.name, "value": self.value, "tol": self.tol,
                "passed": self.passed, "provenance": self.provenance}


def _check_table(checks):
    lines = []
    for ch in checks:
        word = "PASS" if ch.passed else "FAIL"
        lines.append(f"{word}  {ch.name:<44} value={ch.value: .3e}  "
                     f"tol={ch.tol:.1e}")
    return lines


def _summary(command, cfg, checks, scalars, files, passed):
    return {
        "command": command,
        "config": {k: scalar(v, "config") for k, v in config_echo(cfg).items()},
        "checks": [ch.as_json() for ch in checks],
        "scalars": scalars,
        "files": files,
        "passed": passed,
    }


# ---------------------------------------------------------------------------
# verify: the consistency suite
# ---------------------------------------------------------------------------

def verify_checks(cfg):
    """Every closed-form-vs-quadrature identity the package stands on.

    Each check reduces to a single defect number compared against a
    tolerance; tolerances.verify (when set) overrides them all, which is
    how the suite's failure path is exercised.
    """
    grid = make_grid(cfg.grid_L, cfg.grid_N)
    checks = []

    def add(name, value, tol, provenance):
        tol = cfg.verify_tol if cfg.verify_tol is not None else tol
        checks.append(Check(name, float(value), tol, provenance))

    # black-soliton identities
    phi0, dphi0 = black_profile(grid)
    eta0 = eta_weight(grid)
    e2c = black_energy()
    gradsq = integrate(dphi0 * dphi0, grid)
    add("e2_black_quadrature", abs(energy_e2(phi0, grid, du=dphi0) / e2c - 1.0),
        1e-8, "quadrature")
    add("eta0_integral", abs(integrate(eta0, grid) - 3.0), 1e-8, "quadrature")
    add("eta0_l2_equals_e2", abs(integrate(eta0 * eta0, grid) - e2c),
        1e-8, "quadrature")
    add("h0_norm_black_identity",
        abs(integrate(eta0 * phi0 * phi0, grid) - gradsq), 1e-8, "quadrature")

    # dark closed forms vs quadrature (momentum against the corrected
    # catalog entry; see docs/errata.md #1)
    for c in (-0.1, -0.5, -1.0):
        p = resolved_dark(c, grid)
        cf = closed_forms(p)
        phi = dark_profile(grid, p)
        dphi = dark_derivative(grid, p)
        eta = eta_weight(grid, p)
        q = weight_q(grid, p)
        add(f"e2_dark_quadrature[c={c}]",
            abs(energy_e2(phi, grid, du=dphi) / cf.E2 - 1.0), 1e-6, "quadrature")
        add(f"grad_dark_quadrature[c={c}]",
            abs(integrate(np.abs(dphi) ** 2, grid) / cf.dphi_L2sq - 1.0),
            1e-6, "quadrature")
        add(f"weighted_grad_dark_quadrature[c={c}]",
            abs(integrate(np.abs(q) ** 2 * eta, grid)
                / cf.dphi_over_sqrt_eta_L2sq - 1.0), 1e-6, "quadrature")
        m1, m2 = p.effective()
        corrected = -np.arctan(m1 / m2) - 0.5 * m1 * m2 * t_continued(p.mu)
        add(f"p_dark_corrected_catalog[c={c}]",
            mod_pi_distance(modified_momentum(phi, grid), corrected)
            / max(1.0, abs(corrected)), 1e-6, "quadrature")

    # traveling-equation residuals of the closed-form profiles
    black_res = residuals(grid)
    add("ode_residual_black",
        max(black_res["sup_stationary"], black_res["sup_first_order"]),
        1e-10, "measured")
    for c in (-0.1, -0.5, -1.0, 0.5):
        res = residuals(grid, resolved_dark(c, grid))
        add(f"ode_residual_dark[c={c}]", res["sup_traveling"], 1e-6, "measured")

    # quadratic coefficient of the small-speed energy expansion; the
    # window carries real c^4/c^6 content, so the fit degree must absorb
    # it (degree 6 leaves the c^2 coefficient accurate to ~1e-5)
    cs = np.linspace(-0.2, -0.02, 19)
    e2s = [closed_forms(resolved_dark(c, grid)).E2 for c in cs]
    coeff = np.polyfit(cs, e2s, 6)[4]
    add("e2_expansion_coefficient",
        abs(coeff - (-0.25 * (3.0 + e2c))), 1e-3, "closed_form")

    # tail-integral identity on a spread of (b, y) pairs
    pairs = ((1.0, 0.5), (2.0, 1.0), (0.5, 0.3), (4.0, 1.5), (9.0, 2.0))
    add("tail_lemma_identity",
        max(abs(lhs - rhs) for lhs, rhs in
            (lemma_quadrature_identity(b, y) for b, y in pairs)),
        1e-10, "quadrature")

    # small-speed inequality families: both weighted L2 differences scale
    # like c^2, and the (1+x^2) eta_c ratio peaks at x = 0 near (3/8) c^2
    sqrt_eta0 = np.sqrt(eta0)
    speeds = (-0.05, -0.1, -0.2)
    ks, peak_dev, peak_loc = [], 0.0, 0.0
    mid = (grid.N - 1) // 2
    for c in speeds:
        p = resolved_dark(c, grid)
        diff = one_minus_modsq(grid) - one_minus_modsq(grid, p)
        r_eta = phi0 * eta0 - dark_profile(grid, p).real * eta_weight(grid, p)
        ks.append(np.sqrt(integrate((diff / sqrt_eta0) ** 2, grid)) / c ** 2)
        ks.append(np.sqrt(integrate((r_eta / sqrt_eta0) ** 2, grid)) / c ** 2)
        ratio = np.abs(diff) / ((1.0 + grid.x ** 2) * eta_weight(grid, p))
        peak_dev = max(peak_dev, abs(np.max(ratio) / (0.375 * c * c) - 1.0))
        peak_loc = max(peak_loc, abs(grid.x[np.argmax(ratio)]))
    add("modsq_l2_scaling_spread", max(ks) / min(ks) - 1.0, 0.3, "measured")
    add("modsq_l2_scaling_size", max(ks), 5.0, "measured")
    add("a00_ratio_peak_value", peak_dev, 0.05, "measured")
    add("a00_ratio_peak_location", peak_loc, 1e-9, "measured")

    return checks


def cmd_verify(cfg, out_dir, log):
    checks = verify_checks(cfg)
    log.extend(_check_table(checks))
    passed = all(ch.passed for ch in checks)
    if not passed:
        first = next(ch for ch in checks if not ch.passed)
        log.append(f"verify: FAILED {first.name} "
                   f"(value {first.value:.3e} > tol {first.tol:.1e})")
    else:
        log.append(f"verify: all {len(checks)} checks passed")
    write_json(os.path.join(out_dir, "summary.json"),
               _summary("verify", cfg, checks, {}, {}, passed))
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# spectrum
# ---------------------------------------------------------------------------

def cmd_spectrum(cfg, out_dir, log):
    grid = make_grid(cfg.grid_L, cfg.grid_N)
    res = solve_lowest(assemble_pencil(grid), k=3)
    extr = extrapolated_spectrum(grid, k=3)
    sturm = [sign_changes(res.fields[:, j]) for j in range(3)]

    checks = [
        Check("sigma0_zero_mode", abs(res.sigma[0]), 1e-8, "eigensolve"),
        Check("sigma1_unit", abs(res.sigma[1] - 1.0), 1e-4, "eigensolve"),
        Check("sigma2_above_one", 1.0 - res.sigma[2], 0.0, "eigensolve"),
        Check("lambda2_positive", -res.lam[2], 0.0, "eigensolve"),
        Check("sturm_counts_012",
              float(sum(abs(n - j) for j, n in enumerate(sturm))), 0.0,
              "measured"),
        Check("sigma2_extrapolated_pin", abs(extr.sigma[2] - SIGMA2_PIN),
              1e-6, "pinned"),
    ]
    scalars = {
        "sigma0": scalar(res.sigma[0], "eigensolve"),
        "sigma1": scalar(res.sigma[1], "eigensolve"),
        "sigma2": scalar(res.sigma[2], "eigensolve"),
        "lambda2": scalar(res.lam[2], "eigensolve"),
        "sigma2_extrapolated": scalar(extr.sigma[2], "eigensolve"),
        "lambda2_extrapolated": scalar(extr.lam[2], "eigensolve"),
        "sigma2_reference": scalar(SIGMA2_PIN, "pinned"),
        "lambda2_reference": scalar(LAMBDA2_PIN, "pinned"),
        "sturm_counts": scalar(sturm, "measured"),
    }
    passed = all(ch.passed for ch in checks)
    log.extend(_check_table(checks))
    log.append(f"spectrum: sigma = ({_fmt(res.sigma[0])}, {_fmt(res.sigma[1])}, "
               f"{_fmt(res.sigma[2])})")
    write_json(os.path.join(out_dir, "summary.json"),
               _summary("spectrum", cfg, checks, scalars, {}, passed))
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# initial conditions and the shared series runner
# ---------------------------------------------------------------------------

def _seeded_draws(cfg):
    """Deterministic draws for synthetic scenarios, in a fixed order:
    bump centers (3), widths (3), moduli (3), phases (3), then the kink
    offsets a0 and theta0."""
    rng = np.random.default_rng(cfg.ic_seed)
    centers = rng.uniform(-5.0, 5.0, 3)
    widths = rng.uniform(0.5, 2.0, 3)
    moduli = rng.uniform(0.5, 1.0, 3)
    phases = rng.uniform(0.0, 2.0 * np.pi, 3)
    a0 = rng.uniform(-0.75, 0.75)
    theta0 = rng.uniform(-1.0, 1.0)
    return centers, widths, moduli, phases, a0, theta0


def _bump_eval(centers, widths, moduli, phases, x):
    b = np.zeros(np.shape(x), dtype=complex)
    for xc, w, r, ph in zip(centers, widths, moduli, phases):
        b += r * np.exp(1j * ph) * np.exp(-(((x - xc) / w) ** 2))
    return b


def _bisect_amplitude(phi0c, bump, grid, eps):
    """Bump amplitude making the unshifted kink-orbit distance exactly eps.

    Plain bisection with a fixed iteration count, so reruns are bitwise
    identical; the distance is monotone in the amplitude at these sizes.
    """
    def d0_of(amp):
        return distance_dc(phi0c + amp * bump, phi0c, grid)

    hi = eps
    for _ in range(60):
        if d0_of(hi) >= eps:
            break
        hi *= 2.0
    else:
        raise NoConvergence("perturbation amplitude bracket failed")
    lo = 0.0
    for _ in range(100):
        midpoint = 0.5 * (lo + hi)
        if d0_of(midpoint) < eps:
            lo = midpoint
        else:
            hi = midpoint
    return hi


def perturbed_black_ic(cfg, grid):
    """u0 = e^{i theta0} (phi0 + amp * bump)(. - a0), evaluated in closed
    form (no interpolation), with amp bisected so the kink-orbit distance
    of the unshifted core equals ic.eps exactly.

    Returns (u0, info dict with the construction scalars).
    """
    centers, widths, moduli, phases, a0, theta0 = _seeded_draws(cfg)
    phi0c = black_profile(grid)[0].astype(complex)
    if cfg.ic_eps > 0.0:
        bump = _bump_eval(centers, widths, moduli, phases, grid.x)
        amp = _bisect_amplitude(phi0c, bump, grid, cfg.ic_eps)
    else:
        amp = 0.0
    y = grid.x - a0
    core = black_profile_at(y).astype(complex)
    if amp != 0.0:
        core = core + amp * _bump_eval(centers, widths, moduli, phases, y)
    u0 = np.exp(1j * theta0) * core
    d0_initial = distance_dc(phi0c + amp * _bump_eval(
        centers, widths, moduli, phases, grid.x), phi0c, grid) if amp else 0.0
    info = {"a0": a0, "theta0": theta0, "amplitude": amp,
            "d0_unshifted": d0_initial}
    return u0, info


def build_initial(cfg, grid):
    """(u0, SchemeConfig, fit guess or None, info) for the configured ic."""
    base = dict(dt=cfg.time_dt, picard_tol=cfg.picard_tol)
    if cfg.ic_kind == "black":
        u0 = black_profile(grid)[0].astype(complex)
        return u0, SchemeConfig(bc_mode="pinned_static", **base), \
            ModulationState(0.0, 0.0, 0.0), {}
    if cfg.ic_kind == "dark":
        params, flip = resolve_family(cfg.ic_c, grid, cfg.ic_side)
        u0 = flip * dark_profile(grid, params)
        ends = np.array([-grid.L, grid.L])
        c = cfg.ic_c

        def bc(t):
            vals = flip * dark_profile_at(ends - c * t, params)
            return vals[0], vals[1]

        return u0, SchemeConfig(bc_mode="pinned_exact", exact_bc=bc, **base), \
            ModulationState(cfg.ic_c, 0.0, 0.0), {}
    if cfg.ic_kind == "uniform":
        amp = 1.0 - cfg.ic_eps
        u0 = np.full(grid.N, amp, dtype=complex)
        return u0, SchemeConfig(bc_mode="neumann", **base), None, \
            {"amplitude": amp, "phase_rate": 1.0 - amp ** 4}
    # perturbed_black
    u0, info = perturbed_black_ic(cfg, grid)
    return u0, SchemeConfig(bc_mode="neumann", **base), \
        ModulationState(0.0, info["a0"], info["theta0"]), info


def _sample_indices(n_times, cadence):
    return range(0, n_times, cadence)


def series_rows(traj, cadence, center_phases=None):
    """CSV rows at the sampling cadence.

    center_phases (uniform runs, observer off) supplies the theta column
    as the time-unwrapped central phase; modulated runs take (c, a, theta)
    and the distance columns from the fit observer.
    """
    rows = []
    for j, k in enumerate(_sample_indices(len(traj.times), cadence)):
        cons = traj.conserved[k]
        state = traj.states[k]
        if state is not None:
            c, a, theta = state.c, state.a, state.theta
            z_h0, d0 = traj.z_h0[k], traj.d0[k]
        else:
            c = a = z_h0 = d0 = None
            theta = None if center_phases is None else center_phases[j]
        rows.append((traj.times[k], c, a, theta, cons.mass, cons.p_classical,
                     cons.p_modified, cons.E1, cons.E2, z_h0, d0))
    return rows


def _drift(series):
    """Max |value - value(0)| over the samples where the value is defined."""
    defined = [v for v in series if v is not None]
    if not defined:
        return None
    return float(max(abs(v - defined[0]) for v in defined))


# ---------------------------------------------------------------------------
# evolve
# ---------------------------------------------------------------------------

def cmd_evolve(cfg, out_dir, log):
    grid = make_grid(cfg.grid_L, cfg.grid_N)
    u0, scheme, guess, info = build_initial(cfg, grid)
    cadence = max(1, round(EVOLVE_SAMPLE_T / cfg.time_dt))
    traj = evolve(u0, cfg.time_T, grid, scheme, fit_every=cadence,
                  fit_guess=guess, fit_side=cfg.ic_side,
                  fit_speed_cap=cfg.speed_cap,
                  snapshot_every=cadence if guess is None else 0)

    center_phases = None
    if guess is None:
        mid = (grid.N - 1) // 2
        by_time = {t: u for t, u in traj.snapshots}
        ks = list(_sample_indices(len(traj.times), cadence))
        center_phases = np.unwrap(
            [np.angle(by_time[traj.times[k]][mid]) for k in ks])

    rows = series_rows(traj, cadence, center_phases)
    write_series_csv(os.path.join(out_dir, "series.csv"), rows)
    save_snapshot(os.path.join(out_dir, "snapshot_initial.dat"),
                  traj.snapshots[0][1], grid, traj.snapshots[0][0])
    save_snapshot(os.path.join(out_dir, "snapshot_final.dat"),
                  traj.snapshots[-1][1], grid, traj.snapshots[-1][0])

    scalars = {
        "mass_drift": scalar(_drift([c.mass for c in traj.conserved]),
                             "measured"),
        "e2_drift": scalar(_drift([c.E2 for c in traj.conserved]), "measured"),
        "e1_drift": scalar(_drift([c.E1 for c in traj.conserved]), "measured"),
        "p_modified_drift": scalar(
            _drift([c.p_modified for c in traj.conserved]), "measured"),
        "steps": scalar(len(traj.times) - 1, "measured"),
    }
    for key, value in info.items():
        provenance = "closed_form" if key == "phase_rate" else "config"
        scalars[key] = scalar(value, provenance)
    if center_phases is not None:
        ts = [rows[j][0] for j in range(len(rows))]
        slope = np.polyfit(ts, center_phases, 1)[0]
        scalars["phase_rate_measured"] = scalar(float(slope), "measured")
    final_state = next((s for s in reversed(traj.states) if s is not None), None)
    if final_state is not None:
        scalars["c_final"] = scalar(final_state.c, "fit")
        scalars["a_final"] = scalar(final_state.a, "fit")
        scalars["theta_final"] = scalar(final_state.theta, "fit")

    files = {"series_csv": "series.csv",
             "snapshot_initial": "snapshot_initial.dat",
             "snapshot_final": "snapshot_final.dat"}
    log.append(f"evolve[{cfg.ic_kind}]: {len(traj.times) - 1} steps, "
               f"{len(rows)} samples -> {out_dir}")
    write_json(os.path.join(out_dir, "summary.json"),
               _summary("evolve", cfg, [], scalars, files, True))
    return 0


# ---------------------------------------------------------------------------
# modulate
# ---------------------------------------------------------------------------

def cmd_modulate(cfg, out_dir, log):
    """Round trip: synthesize a modulated soliton snapshot, write and
    reload it, fit (c, a, theta) back, report the recovery error."""
    grid = make_grid(cfg.grid_L, cfg.grid_N)
    _, _, _, _, a_true, theta_true = _seeded_draws(cfg)
    c_true = cfg.ic_c
    u = np.exp(1j * theta_true) * family_profile_at(
        grid.x - a_true, c_true, grid, cfg.ic_side)

    snap_path = os.path.join(out_dir, "snapshot_synthetic.dat")
    save_snapshot(snap_path, u, grid, 0.0)
    loaded, grid_loaded, _ = load_snapshot(snap_path)

    state = fit(loaded, grid_loaded, ModulationState(0.0, 0.0, 0.0),
                side=cfg.ic_side, speed_cap=cfg.speed_cap,
                newton_tol=cfg.newton_tol)
    err = max(abs(state.c - c_true), abs(state.a - a_true),
              abs(state.theta - theta_true))

    checks = [Check("round_trip_recovery", err, 1e-8, "fit")]
    scalars = {
        "c_true": scalar(c_true, "config"),
        "a_true": scalar(a_true, "config"),
        "theta_true": scalar(theta_true, "config"),
        "c_fit": scalar(state.c, "fit"),
        "a_fit": scalar(state.a, "fit"),
        "theta_fit": scalar(state.theta, "fit"),
        "recovery_error": scalar(err, "measured"),
        "fit_residual_norm": scalar(state.residual_norm, "fit"),
    }
    passed = all(ch.passed for ch in checks)
    log.extend(_check_table(checks))
    log.append(f"modulate: recovered ({_fmt(state.c)}, {_fmt(state.a)}, "
               f"{_fmt(state.theta)})")
    write_json(os.path.join(out_dir, "summary.json"),
               _summary("modulate", cfg, checks, scalars,
                        {"snapshot": "snapshot_synthetic.dat"}, passed))
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# stability
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StabilityReport:
    """Maxima of the perturbed-kink run, as reported in summary.json."""

    d0_initial: float
    d0_max: float
    ratio: float
    c_max: float
    a_rate_max: float
    theta_rate_max: float
    rate_sum_max: float
    passed: bool


def cmd_stability(cfg, out_dir, log):
    if cfg.ic_kind != "perturbed_black":
        raise ConfigError(f"ic.kind: stability needs 'perturbed_black', "
                          f"got {cfg.ic_kind!r}")
    if cfg.ic_eps > 0.05:
        raise ConfigError(f"ic.eps: stability caps the amplitude at 0.05, "
                          f"got {cfg.ic_eps}")
    grid = make_grid(cfg.grid_L, cfg.grid_N)
    u0, scheme, guess, info = build_initial(cfg, grid)
    cadence = max(1, round(STABILITY_SAMPLE_T / cfg.time_dt))
    traj = evolve(u0, cfg.time_T, grid, scheme, fit_every=cadence,
                  fit_guess=guess, fit_side=cfg.ic_side,
                  fit_speed_cap=cfg.speed_cap)

    rows = series_rows(traj, cadence)
    write_series_csv(os.path.join(out_dir, "series.csv"), rows)

    fitted = [(traj.times[k], traj.states[k], traj.d0[k])
              for k in _sample_indices(len(traj.times), cadence)]
    ts = np.array([t for t, _, _ in fitted])
    cs = np.array([s.c for _, s, _ in fitted])
    a_s = np.array([s.a for _, s, _ in fitted])
    th_s = np.array([s.theta for _, s, _ in fitted])
    d0s = np.array([d for _, _, d in fitted])
    a_rate = np.gradient(a_s, ts)
    th_rate = np.gradient(th_s, ts)

    eps = cfg.ic_eps
    d0_initial = float(d0s[0])
    d0_max = float(np.max(d0s))
    ratio = d0_max / d0_initial if d0_initial > 0.0 else float(len(d0s) >= 1)
    c_max = float(np.max(np.abs(cs)))
    rate_sum_max = float(np.max(np.abs(a_rate) + np.abs(th_rate)))
    if eps > 0.0:
        passed = (ratio <= 10.0 and c_max <= 10.0 * eps
                  and rate_sum_max <= STABILITY_RATE_K * eps)
    else:
        passed = d0_max <= 1e-6
    report = StabilityReport(
        d0_initial=d0_initial, d0_max=d0_max, ratio=ratio, c_max=c_max,
        a_rate_max=float(np.max(np.abs(a_rate))),
        theta_rate_max=float(np.max(np.abs(th_rate))),
        rate_sum_max=rate_sum_max, passed=passed)

    checks = []
    if eps > 0.0:
        checks = [
            Check("d0_ratio_bound", report.ratio, 10.0, "measured"),
            Check("speed_bound", report.c_max, 10.0 * eps, "measured"),
            Check("rate_bound", report.rate_sum_max, STABILITY_RATE_K * eps,
                  "measured"),
        ]
    else:
        checks = [Check("exact_soliton_d0", report.d0_max, 1e-6, "measured")]
    scalars = {
        "d0_initial": scalar(report.d0_initial, "measured"),
        "d0_max": scalar(report.d0_max, "measured"),
        "ratio": scalar(report.ratio, "measured"),
        "c_max": scalar(report.c_max, "measured"),
        "a_rate_max": scalar(report.a_rate_max, "measured"),
        "theta_rate_max": scalar(report.theta_rate_max, "measured"),
        "rate_sum_max": scalar(report.rate_sum_max, "measured"),
        "rate_bound_K": scalar(STABILITY_RATE_K, "pinned"),
        "samples": scalar(len(rows), "measured"),
    }
    for key, value in info.items():
        scalars[key] = scalar(value, "config" if key in ("a0", "theta0")
                              else "measured")
    log.extend(_check_table(checks))
    log.append(f"stability[eps={eps}]: ratio={report.ratio:.3f} "
               f"c_max={report.c_max:.3e} rate_sum_max={report.rate_sum_max:.3e}")
    write_json(os.path.join(out_dir, "summary.json"),
               _summary("stability", cfg, checks, scalars,
                        {"series_csv": "series.csv"}, passed))
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

_COMMANDS = {
    "verify": cmd_verify,
    "spectrum": cmd_spectrum,
    "evolve": cmd_evolve,
    "modulate": cmd_modulate,
    "stability": cmd_stability,
}


def _run_one(task):
    """(command, config path, out dir) -> exit code; prints its own log
    block atomically so fanned-out runs do not interleave."""
    command, config_path, out_dir = task
    log = [f"== gpq {command} {config_path} =="]
    try:
        cfg = load_config(config_path)
        os.makedirs(out_dir, exist_ok=True)
        code = _COMMANDS[command](cfg, out_dir, log)
    except ConfigError as exc:
        log.append(f"config error: {exc}")
        code = 2
    except _NUMERICAL_ERRORS as exc:
        log.append(f"numerical failure ({type(exc).__name__}): {exc}")
        code = 3
    print("\n".join(log), flush=True)
    if code == 2:
        print(f"gpq {command}: config error (see above)", file=sys.stderr)
    return code


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gpq",
        description="numerical laboratory for the one-dimensional quintic "
                    "Gross-Pitaevskii equation")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("verify", "run the closed-form consistency suite"),
            ("spectrum", "eigenvalues of the linearized pencil"),
            ("evolve", "time integration with CSV/snapshot outputs"),
            ("modulate", "synthetic snapshot round-trip fit"),
            ("stability", "perturbed-kink stability experiment")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", action="append", required=True,
                       metavar="PATH", help="config file (repeatable)")
        p.add_argument("--jobs", type=int, default=1, metavar="K",
                       help="processes for fanning out multiple configs")
        p.add_argument("--out", default=None, metavar="DIR",
                       help="output directory (overrides GPQ_OUT and "
                            "output.dir)")
    return parser


def _out_dirs(args, cfgs):
    """One output directory per config; configs get stem subdirectories
    when more than one runs, so parallel runs never collide."""
    outs = []
    taken = {}
    for path, cfg in zip(args.config, cfgs):
        base = resolve_out_dir(cfg, args.out)
        if len(cfgs) == 1:
            outs.append(base)
            continue
        stem = Path(path).stem
        n = taken.get((base, stem), 0)
        taken[(base, stem)] = n + 1
        outs.append(os.path.join(base, stem if n == 0 else f"{stem}_{n}"))
    return outs


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("gpq: --jobs must be at least 1", file=sys.stderr)
        return 2
    try:
        cfgs = [load_config(p) for p in args.config]
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    tasks = [(args.command, path, out)
             for path, out in zip(args.config, _out_dirs(args, cfgs))]
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(pool.map(_run_one, tasks))
    else:
        codes = [_run_one(t) for t in tasks]
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
