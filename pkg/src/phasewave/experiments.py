"""Experiment drivers: paired transmission/reflection runs, parameter
sweeps, oblique-incidence refraction and 3D spherical spreading.

Analysis windows are computed from the run geometry and sound speeds so
every peak is measured after the relevant front arrives and before the
first boundary reflection returns.
"""
from __future__ import annotations

import os
import time as _time
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import io as pwio
from .config import CaseConfig, ConfigError, SweepSpec, serialize_config, \
    with_overrides
from .diagnostics import (CoefficientReport, EntropyRecorder,
                          MaxPressureTracker, Probe, ProbeRecorder,
                          ProbeSampler, SpreadingReport, critical_angle,
                          interface_resolution, snell_transmitted_angle,
                          spreading_profile, transmission_reflection,
                          transmitted_angle)
from .discretization import BoundarySpec, Discretization, FieldStorage
from .mesh import Mesh, build_cartesian_mesh
from .timestepping import RunResult, TimeControls, compute_dt, run


def build_mesh(cfg: CaseConfig) -> Mesh:
    return build_cartesian_mesh(cfg.mesh.extents, cfg.mesh.counts, cfg.order,
                                grading=cfg.mesh.grading())


def default_boundaries(cfg: CaseConfig) -> dict:
    """Per-experiment wall defaults: rigid walls along the propagation axis,
    slip walls transverse (2D/3D)."""
    conditions = {"left": "no_slip_wall", "right": "no_slip_wall",
                  "bottom": "slip_wall", "top": "slip_wall",
                  "back": "slip_wall", "front": "slip_wall"}
    conditions.update(cfg.boundaries)
    return conditions


def build_discretization(cfg: CaseConfig, mesh: Optional[Mesh] = None,
                         source_enabled: Optional[bool] = None) -> Discretization:
    mesh = mesh if mesh is not None else build_mesh(cfg)
    source = cfg.source
    if source_enabled is not None:
        source = replace(source, enabled=source_enabled)
    return Discretization(mesh, cfg.phases, cfg.interface,
                          BoundarySpec(default_boundaries(cfg)), source,
                          flux=cfg.flux)


def _mid(extent):
    return 0.5 * (extent[0] + extent[1])


def default_probes(cfg: CaseConfig) -> dict:
    """Probe positions when the config does not name any."""
    if cfg.probes:
        return dict(cfg.probes)
    my, mz = _mid(cfg.mesh.extents[1]), _mid(cfg.mesh.extents[2])
    if cfg.experiment == "snell":
        return {"transmitted": (0.02, _mid(cfg.mesh.extents[1]), mz)}
    return {"left": (-0.5, my, mz), "right": (0.5, my, mz)}


@dataclass
class TrGeometry:
    """Arrival and contamination times of the 1D transmission problem."""

    incident_front: float
    transmitted_front: float
    reflected_front: float
    left_contamination: float
    right_contamination: float
    t_end: float
    incident_window: tuple
    transmitted_window: tuple
    reflected_window: tuple


def tr_geometry(cfg: CaseConfig, probes: dict) -> TrGeometry:
    """Ray arithmetic for the plane-interface problem (interface at x = 0)."""
    cs1, cs2 = cfg.phases.cs1, cfg.phases.cs2
    x0 = cfg.source.center[0]
    xl = probes["left"][0]
    xr = probes["right"][0]
    wall_l, wall_r = cfg.mesh.extents[0]
    if not (wall_l < x0 < xl < 0.0 < xr < wall_r):
        raise ConfigError(
            "tr_pair expects wall_l < source < left probe < 0 < right probe "
            f"< wall_r, got source {x0}, probes {xl}/{xr}, walls "
            f"{wall_l}/{wall_r}")
    f = cfg.source.frequency
    margin = 0.25 / f

    incident = (xl - x0) / cs1
    transmitted = -x0 / cs1 + xr / cs2
    reflected = (-x0 - xl) / cs1
    contam_left = (x0 - wall_l) / cs1 + (xl - wall_l) / cs1
    contam_right = -x0 / cs1 + (2.0 * wall_r - xr) / cs2

    t_end = cfg.time.t_end
    if t_end is None:
        t_end = reflected + cfg.analysis_periods / f
    return TrGeometry(
        incident_front=incident, transmitted_front=transmitted,
        reflected_front=reflected, left_contamination=contam_left,
        right_contamination=contam_right, t_end=t_end,
        incident_window=(max(0.0, incident - margin),
                         min(t_end, contam_left)),
        transmitted_window=(max(0.0, transmitted - margin),
                            min(t_end, contam_right)),
        reflected_window=(max(0.0, reflected - margin),
                          min(t_end, contam_left)))


def _leg(cfg: CaseConfig, initial: str, dt: float, t_end: float,
         probes: dict, source_enabled=True):
    mesh = build_mesh(cfg)
    disc = build_discretization(cfg, mesh, source_enabled=source_enabled)
    fields = disc.allocate_fields()
    disc.set_initial_condition(fields, initial,
                               theta_i=np.deg2rad(cfg.theta_deg))
    recorders = {}
    callbacks = []
    for name, pos in probes.items():
        rec = ProbeRecorder(disc, ProbeSampler.bind(mesh, Probe(pos)))
        recorders[name] = rec
        callbacks.append((cfg.probe_cadence, rec))
    controls = TimeControls(t_end=t_end, cfl=cfg.time.cfl,
                            max_steps=cfg.time.max_steps, fixed_dt=dt)
    result = run(disc, fields, controls, callbacks=callbacks)
    return disc, fields, recorders, result


def pair_dt(cfg: CaseConfig) -> float:
    """Shared fixed step: the smaller of the two legs' CFL bounds."""
    mesh = build_mesh(cfg)
    disc = build_discretization(cfg, mesh)
    fields = disc.allocate_fields()
    disc.set_initial_condition(fields, "flat_1d")
    bound_two = disc.wave_dt_bound(fields)
    disc.set_initial_condition(fields, "uniform_1")
    bound_one = disc.wave_dt_bound(fields)
    return cfg.time.cfl * min(bound_two, bound_one)


@dataclass
class TrPairResult:
    report: CoefficientReport
    geometry: TrGeometry
    dt: float
    n_steps: int
    n_points_interface: float
    dofs: int
    series: dict


def run_tr_pair(cfg: CaseConfig, outdir: Optional[str] = None,
                single_phase_cache: Optional[dict] = None) -> TrPairResult:
    """Two-phase run plus its single-phase companion on the same axis.

    The companion isolates the incident signal; the reflected one is the
    left-probe difference.  Both legs share one fixed dt so the series
    subtract sample-by-sample.
    """
    probes = default_probes(cfg)
    geo = tr_geometry(cfg, probes)
    dt = cfg.time.fixed_dt or pair_dt(cfg)

    t_start = _time.time()
    disc, fields, recs, result = _leg(cfg, "flat_1d", dt, geo.t_end, probes)
    two_left = recs["left"].series()
    two_right = recs["right"].series()

    cache_key = None
    if single_phase_cache is not None:
        cache_key = (cfg.mesh.counts, cfg.mesh.extents, cfg.order, cfg.flux,
                     cfg.source.frequency, dt, geo.t_end,
                     tuple(sorted(probes.items())), cfg.probe_cadence)
    if cache_key is not None and cache_key in single_phase_cache:
        one_left = single_phase_cache[cache_key]
    else:
        _, _, recs1, _ = _leg(cfg, "uniform_1", dt, geo.t_end, probes)
        one_left = recs1["left"].series()
        if cache_key is not None:
            single_phase_cache[cache_key] = one_left

    report = transmission_reflection(
        two_left, two_right, one_left, cfg.phases,
        incident_window=geo.incident_window,
        transmitted_window=geo.transmitted_window,
        reflected_window=geo.reflected_window)

    length = cfg.mesh.extents[0][1] - cfg.mesh.extents[0][0]
    n_p = interface_resolution(cfg.interface.epsilon, cfg.mesh.counts[0],
                               cfg.order, length)
    out = TrPairResult(report=report, geometry=geo, dt=dt,
                       n_steps=result.n_steps, n_points_interface=n_p,
                       dofs=cfg.mesh.counts[0] * (cfg.order + 1),
                       series={"two_left": two_left, "two_right": two_right,
                               "one_left": one_left})
    if outdir:
        pwio.write_probe_csv(os.path.join(outdir, "probe_left.csv"), two_left)
        pwio.write_probe_csv(os.path.join(outdir, "probe_right.csv"),
                             two_right)
        pwio.write_probe_csv(os.path.join(outdir, "probe_incident.csv"),
                             one_left)
        pwio.write_coefficient_csv(os.path.join(outdir, "coefficients.csv"),
                                   [("tr_pair", report)])
        if cfg.outputs.manifest:
            pwio.write_manifest(os.path.join(outdir, "manifest.txt"),
                                serialize_config(cfg),
                                _time.time() - t_start, result.n_steps)
    return out


@dataclass
class SweepRow:
    value: float
    dofs: int
    n_points_interface: float
    report: CoefficientReport
    failed: bool = False
    error: str = ""


def apply_sweep_value(cfg: CaseConfig, vary: str, value: float) -> CaseConfig:
    if vary == "order":
        return with_overrides(cfg, order=int(value))
    if vary == "n_el":
        return with_overrides(cfg, n_el=int(value))
    if vary == "epsilon":
        return with_overrides(cfg, epsilon=value)
    if vary == "frequency":
        return with_overrides(cfg, frequency=value)
    if vary == "theta_i":
        return with_overrides(cfg, theta=value)
    raise ConfigError(f"unknown sweep parameter {vary!r}")


def run_sweep(cfg: CaseConfig, sweep: Optional[SweepSpec] = None,
              outdir: Optional[str] = None) -> list:
    """Coefficient errors across one varied parameter.

    Rows that fail keep their place in the table with the failure recorded;
    the sweep continues.  With reference = best_numerical the reference leg
    (reference_n_el, reference_order) runs first.
    """
    sweep = sweep or cfg.sweep
    sweep.validate()
    cache: dict = {}

    best = None
    if sweep.reference == "best_numerical":
        ref_cfg = with_overrides(
            cfg, order=sweep.reference_order or cfg.order,
            n_el=sweep.reference_n_el or cfg.mesh.counts[0])
        best = run_tr_pair(ref_cfg, single_phase_cache=cache).report

    rows = []
    for value in sweep.values:
        case = apply_sweep_value(cfg, sweep.vary, value)
        try:
            res = run_tr_pair(case, single_phase_cache=cache)
            report = res.report
            if best is not None:
                report = report.with_reference(best.t_num, best.r_num)
            rows.append(SweepRow(value=value, dofs=res.dofs,
                                 n_points_interface=res.n_points_interface,
                                 report=report))
        except Exception as exc:  # keep sweeping, mark the row
            rows.append(SweepRow(value=value, dofs=0, n_points_interface=0.0,
                                 report=None, failed=True, error=str(exc)))
    if outdir:
        _write_sweep_csv(os.path.join(outdir, "sweep.csv"), sweep, rows)
    return rows


def _write_sweep_csv(path: str, sweep: SweepSpec, rows: list) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        fh.write("varied,value,dofs,n_points_interface,t_num,r_num,"
                 "e_mod_t,e_mod_r,e_num_t,e_num_r,failed,error\n")
        for r in rows:
            if r.failed:
                fh.write(f"{sweep.vary},{r.value},,,,,,,,,1,{r.error}\n")
                continue
            rep = r.report
            e_nt = "" if rep.e_num_t is None else f"{rep.e_num_t:.17g}"
            e_nr = "" if rep.e_num_r is None else f"{rep.e_num_r:.17g}"
            fh.write(f"{sweep.vary},{r.value:.17g},{r.dofs},"
                     f"{r.n_points_interface:.17g},{rep.t_num:.17g},"
                     f"{rep.r_num:.17g},{rep.e_mod_t:.17g},"
                     f"{rep.e_mod_r:.17g},{e_nt},{e_nr},0,\n")


@dataclass
class SnellResult:
    theta_i: float
    theta_t_exact: float
    theta_t_measured: float
    error_rad: float
    angles: np.ndarray
    times: np.ndarray
    dofs: int
    n_steps: int


def snell_t_end(cfg: CaseConfig, probe_x: float) -> float:
    cs1, cs2 = cfg.phases.cs1, cfg.phases.cs2
    x0 = cfg.source.center[0]
    return -x0 / cs1 + probe_x / cs2 + \
        cfg.analysis_periods / cfg.source.frequency


def run_snell(cfg: CaseConfig, outdir: Optional[str] = None) -> SnellResult:
    """Oblique plane-wave refraction across a slanted interface.

    Incidence angles at or beyond the critical angle are rejected with the
    computed limit in the message.
    """
    theta_i = np.deg2rad(cfg.theta_deg)
    theta_c = critical_angle(cfg.phases.cs1, cfg.phases.cs2)
    if theta_i >= theta_c:
        raise ConfigError(
            f"incidence angle {cfg.theta_deg} deg is at or beyond the "
            f"critical angle {np.rad2deg(theta_c):.3f} deg: total reflection")
    theta_t = snell_transmitted_angle(theta_i, cfg.phases.cs1, cfg.phases.cs2)

    probes = default_probes(cfg)
    name = next(iter(probes))
    probe_x = probes[name][0]
    t_end = cfg.time.t_end or snell_t_end(cfg, probe_x)

    t_start = _time.time()
    mesh = build_mesh(cfg)
    disc = build_discretization(cfg, mesh)
    fields = disc.allocate_fields()
    disc.set_initial_condition(fields, "slanted_2d", theta_i=theta_i)
    rec = ProbeRecorder(disc, ProbeSampler.bind(mesh, Probe(probes[name])))
    controls = TimeControls(t_end=t_end, cfl=cfg.time.cfl,
                            max_steps=cfg.time.max_steps,
                            fixed_dt=cfg.time.fixed_dt)
    result = run(disc, fields, controls, callbacks=[(cfg.probe_cadence, rec)])

    series = rec.series()
    angles, first = transmitted_angle(series)
    n_active = int(np.prod([c for c in cfg.mesh.counts if c > 1]))
    ndim = sum(1 for c in cfg.mesh.counts if c > 1)
    out = SnellResult(
        theta_i=theta_i, theta_t_exact=theta_t, theta_t_measured=first,
        error_rad=abs(first - theta_t), angles=angles, times=series["t"],
        dofs=n_active * (cfg.order + 1) ** ndim, n_steps=result.n_steps)
    if outdir:
        pwio.write_angle_csv(os.path.join(outdir, "angle.csv"),
                             series["t"], angles)
        pwio.write_probe_csv(os.path.join(outdir, "probe_transmitted.csv"),
                             series)
        if cfg.outputs.manifest:
            pwio.write_manifest(os.path.join(outdir, "manifest.txt"),
                                serialize_config(cfg),
                                _time.time() - t_start, result.n_steps)
    return out


def run_spreading(cfg: CaseConfig, outdir: Optional[str] = None,
                  r_max: Optional[float] = None) -> SpreadingReport:
    """3D ball source above a plane interface: radial decay of max |p|."""
    if cfg.source.kind != "gaussian_ball":
        raise ConfigError("spreading requires source.kind = gaussian_ball")
    h = cfg.source.center[2]
    if h <= 0:
        raise ConfigError("spreading expects the source above the interface "
                          "(source center z > 0)")
    t_start = _time.time()
    mesh = build_mesh(cfg)
    disc = build_discretization(cfg, mesh)
    fields = disc.allocate_fields()
    disc.set_initial_condition(fields, "plane_z_3d")

    cs1, cs2 = cfg.phases.cs1, cfg.phases.cs2
    z_lo = cfg.mesh.extents[2][0]
    t_end = cfg.time.t_end
    if t_end is None:
        # front reaches the deep half plus one forcing period of settling
        t_end = h / cs1 + abs(z_lo) / cs2 + 1.0 / cfg.source.frequency

    tracker = MaxPressureTracker()
    controls = TimeControls(t_end=t_end, cfl=cfg.time.cfl,
                            max_steps=cfg.time.max_steps,
                            fixed_dt=cfg.time.fixed_dt)
    result = run(disc, fields, controls, callbacks=[(1, tracker)])

    pos = mesh.x.transpose(0, 2, 3, 4, 1).reshape(-1, 3)
    peaks = tracker.max_p.reshape(-1)
    if r_max is not None:
        keep = np.linalg.norm(pos - np.array(cfg.source.center), axis=1) \
            <= r_max
        virt = np.array([cfg.source.center[0], cfg.source.center[1],
                         -h * cs1 / cs2])
        keep |= np.linalg.norm(pos - virt, axis=1) <= r_max
        pos, peaks = pos[keep], peaks[keep]
    report = spreading_profile(pos, peaks, cfg.source.center, h, cs1 / cs2,
                               interface_band=3.0 * cfg.interface.epsilon)
    if outdir:
        pwio.write_spreading_csv(os.path.join(outdir, "spreading.csv"),
                                 report)
        if cfg.outputs.manifest:
            pwio.write_manifest(os.path.join(outdir, "manifest.txt"),
                                serialize_config(cfg),
                                _time.time() - t_start, result.n_steps)
    return report


def run_single(cfg: CaseConfig, outdir: Optional[str] = None) -> RunResult:
    """Plain run of the configured case with the configured outputs."""
    if cfg.time.t_end is None:
        raise ConfigError("single_run requires time.t_end")
    t_start = _time.time()
    mesh = build_mesh(cfg)
    disc = build_discretization(cfg, mesh)
    fields = disc.allocate_fields()
    disc.set_initial_condition(fields, cfg.initial,
                               theta_i=np.deg2rad(cfg.theta_deg))
    callbacks = []
    recorders = {}
    for name, pos in default_probes(cfg).items():
        rec = ProbeRecorder(disc, ProbeSampler.bind(mesh, Probe(pos)))
        recorders[name] = rec
        callbacks.append((cfg.probe_cadence, rec))
    entropy = None
    if cfg.outputs.entropy_csv:
        entropy = EntropyRecorder(disc)
        callbacks.append((cfg.outputs.entropy_cadence, entropy))
    if cfg.outputs.snapshot_every and outdir:
        def snap(step, t, f, _dir=outdir):
            pwio.write_snapshot(os.path.join(_dir, f"state_{step:08d}.bin"),
                                mesh, f.q)
        callbacks.append((cfg.outputs.snapshot_every, snap))

    controls = TimeControls(t_end=cfg.time.t_end, cfl=cfg.time.cfl,
                            max_steps=cfg.time.max_steps,
                            fixed_dt=cfg.time.fixed_dt)
    result = run(disc, fields, controls, callbacks=callbacks,
                 step_log_every=cfg.outputs.step_log_every)
    if outdir:
        if cfg.outputs.probe_csv:
            for name, rec in recorders.items():
                pwio.write_probe_csv(os.path.join(outdir, f"probe_{name}.csv"),
                                     rec.series())
        if entropy is not None and len(entropy.times) >= 3:
            pwio.write_entropy_csv(os.path.join(outdir, "entropy.csv"),
                                   entropy.report())
        if cfg.outputs.step_log_every:
            pwio.write_step_log(os.path.join(outdir, "steps.csv"),
                                result.step_log)
        if cfg.outputs.manifest:
            pwio.write_manifest(os.path.join(outdir, "manifest.txt"),
                                serialize_config(cfg),
                                _time.time() - t_start, result.n_steps)
    return result
