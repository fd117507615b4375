"""Typed flat key-value experiment configuration.

The format is INI-style sections of scalar/vector values, documented in the
README.  Parsing is strict: unknown sections or keys are rejected, missing
required keys are reported together, and every value is validated against
the physical invariants it feeds.  parse(serialize(parse(text))) is the
identity.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, replace
from typing import Optional

from .mesh import AxisGrading
from .model import InterfaceParams, PhasePair, SourceSpec

EXPERIMENT_TYPES = ("single_run", "tr_pair", "epsilon_sweep", "snell",
                    "spreading", "convergence_sweep")
SWEEP_PARAMETERS = ("order", "n_el", "epsilon", "frequency", "theta_i")
SWEEP_REFERENCES = ("best_numerical", "analytic")


@dataclass
class MeshSection:
    extents: tuple = ((-2.0, 2.0), (0.0, 1.0), (0.0, 1.0))
    counts: tuple = (500, 1, 1)
    grading_axis: Optional[int] = None
    grading_plane: float = 0.0
    grading_ratio: float = 0.8

    def grading(self) -> Optional[dict]:
        if self.grading_axis is None:
            return None
        return {self.grading_axis: AxisGrading(self.grading_plane,
                                               self.grading_ratio)}


@dataclass
class TimeSection:
    t_end: Optional[float] = None     # None: derived from run geometry
    cfl: float = 0.4
    max_steps: int = 10**9
    fixed_dt: Optional[float] = None


@dataclass
class OutputSection:
    directory: str = "out"
    probe_csv: bool = True
    entropy_csv: bool = False
    entropy_cadence: int = 10
    step_log_every: int = 0
    snapshot_every: int = 0
    manifest: bool = True


@dataclass
class SweepSpec:
    vary: str = "order"
    values: tuple = ()
    reference: str = "analytic"
    reference_order: Optional[int] = None
    reference_n_el: Optional[int] = None

    def validate(self):
        if self.vary not in SWEEP_PARAMETERS:
            raise ConfigError(f"sweep.vary must be one of {SWEEP_PARAMETERS}, "
                              f"got {self.vary!r}")
        if not self.values:
            raise ConfigError("sweep.values must be a non-empty list")
        if self.reference not in SWEEP_REFERENCES:
            raise ConfigError(
                f"sweep.reference must be one of {SWEEP_REFERENCES}")


@dataclass
class CaseConfig:
    """Complete description of one experiment (SI units throughout)."""

    experiment: str = "single_run"
    theta_deg: float = 10.0          # snell incidence angle
    analysis_periods: float = 2.0    # wavetrain length used in windows
    phases: PhasePair = field(default_factory=PhasePair)
    interface: InterfaceParams = field(default_factory=InterfaceParams)
    source: SourceSpec = field(default_factory=SourceSpec)
    mesh: MeshSection = field(default_factory=MeshSection)
    order: int = 6
    flux: str = "ers"
    boundaries: dict = field(default_factory=dict)
    time: TimeSection = field(default_factory=TimeSection)
    probes: dict = field(default_factory=dict)
    probe_cadence: int = 1
    initial: str = "flat_1d"
    outputs: OutputSection = field(default_factory=OutputSection)
    sweep: SweepSpec = field(default_factory=SweepSpec)


class ConfigError(ValueError):
    """Schema violation with the offending section/key named."""


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_bool(text, where):
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{where}: expected a boolean, got {text!r}")


def _parse_floats(text, n, where):
    parts = text.split()
    if len(parts) != n:
        raise ConfigError(f"{where}: expected {n} numbers, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


_SCHEMA = {
    "experiment": {"type", "theta_deg", "analysis_periods"},
    "phases": {"rho1", "rho2", "cs1", "cs2", "eta1", "eta2"},
    "interface": {"sigma", "epsilon", "mobility", "chemical_time"},
    "source": {"kind", "frequency", "width", "center", "gravity", "enabled"},
    "mesh": {"extents", "counts", "grading_axis", "grading_plane",
             "grading_ratio"},
    "solver": {"order", "flux"},
    "boundaries": {"left", "right", "bottom", "top", "back", "front"},
    "time": {"t_end", "cfl", "max_steps", "fixed_dt"},
    "initial": {"kind"},
    "probes": None,   # free-form probe names plus 'cadence'
    "outputs": {"directory", "probe_csv", "entropy_csv", "entropy_cadence",
                "step_log_every", "snapshot_every", "manifest"},
    "sweep": {"vary", "values", "reference", "reference_order",
              "reference_n_el"},
}


def parse_config(text: str) -> CaseConfig:
    """Parse and validate a configuration document."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    unknown_sections = set(cp.sections()) - set(_SCHEMA)
    if unknown_sections:
        raise ConfigError(f"unknown sections: {sorted(unknown_sections)}")
    for section, allowed in _SCHEMA.items():
        if allowed is None or section not in cp:
            continue
        extra = set(cp[section]) - allowed
        if extra:
            raise ConfigError(
                f"unknown keys in [{section}]: {sorted(extra)}")

    missing = []
    if "experiment" not in cp or "type" not in cp["experiment"]:
        missing.append("experiment.type")
    if missing:
        raise ConfigError(f"missing required keys: {missing}")

    cfg = CaseConfig()
    exp = cp["experiment"]
    etype = exp.get("type").strip()
    if etype not in EXPERIMENT_TYPES:
        raise ConfigError(f"experiment.type must be one of "
                          f"{EXPERIMENT_TYPES}, got {etype!r}")
    cfg.experiment = etype
    cfg.theta_deg = float(exp.get("theta_deg", cfg.theta_deg))
    cfg.analysis_periods = float(exp.get("analysis_periods",
                                         cfg.analysis_periods))

    if "phases" in cp:
        s = cp["phases"]
        try:
            cfg.phases = PhasePair(
                rho1=float(s.get("rho1", 1.0)), rho2=float(s.get("rho2", 2.0)),
                cs1=float(s.get("cs1", 343.0)),
                cs2=float(s.get("cs2", 1481.0)),
                eta1=float(s.get("eta1", 1e-16)),
                eta2=float(s.get("eta2", 1e-16)))
        except ValueError as exc:
            raise ConfigError(f"[phases]: {exc}") from None

    if "interface" in cp:
        s = cp["interface"]
        sigma = float(s.get("sigma", 1e-16))
        epsilon = float(s.get("epsilon", 0.01))
        try:
            if "chemical_time" in s:
                if "mobility" in s:
                    raise ConfigError(
                        "[interface]: give mobility or chemical_time, not both")
                cfg.interface = InterfaceParams.from_chemical_time(
                    sigma, epsilon, float(s.get("chemical_time")))
            else:
                cfg.interface = InterfaceParams(
                    sigma=sigma, epsilon=epsilon,
                    mobility=float(s.get("mobility", 0.01)))
        except ValueError as exc:
            raise ConfigError(f"[interface]: {exc}") from None

    if "source" in cp:
        s = cp["source"]
        try:
            cfg.source = SourceSpec(
                kind=s.get("kind", "gaussian_line_x").strip(),
                frequency=float(s.get("frequency", 1000.0)),
                width=float(s.get("width", 0.01)),
                center=_parse_floats(s.get("center", "-0.55 0 0"), 3,
                                     "source.center"),
                gravity=_parse_floats(s.get("gravity", "0 0 0"), 3,
                                      "source.gravity"),
                enabled=_parse_bool(s.get("enabled", "true"), "source.enabled"))
        except ValueError as exc:
            raise ConfigError(f"[source]: {exc}") from None

    if "mesh" in cp:
        s = cp["mesh"]
        ext = _parse_floats(s.get("extents", "-2 2 0 1 0 1"), 6,
                            "mesh.extents")
        extents = tuple((ext[2 * d], ext[2 * d + 1]) for d in range(3))
        if any(hi <= lo for lo, hi in extents):
            raise ConfigError(f"mesh.extents: inverted interval in {extents}")
        counts = _parse_floats(s.get("counts", "500 1 1"), 3, "mesh.counts")
        if any(c != int(c) or c < 1 for c in counts):
            raise ConfigError(
                f"mesh.counts: element counts must be positive integers, "
                f"got {counts}")
        grading_axis = s.get("grading_axis", None)
        ratio = float(s.get("grading_ratio", 0.8))
        if ratio <= 0:
            raise ConfigError("mesh.grading_ratio: grading ratio must be > 0")
        cfg.mesh = MeshSection(
            extents=extents, counts=tuple(int(c) for c in counts),
            grading_axis=None if grading_axis is None else int(grading_axis),
            grading_plane=float(s.get("grading_plane", 0.0)),
            grading_ratio=ratio)

    if "solver" in cp:
        s = cp["solver"]
        cfg.order = int(s.get("order", 6))
        if cfg.order < 1:
            raise ConfigError("solver.order: polynomial order must be >= 1")
        cfg.flux = s.get("flux", "ers").strip()
        if cfg.flux not in ("central", "ers"):
            raise ConfigError(
                f"solver.flux must be 'central' or 'ers', got {cfg.flux!r}")

    if "boundaries" in cp:
        cfg.boundaries = {k: v.strip() for k, v in cp["boundaries"].items()}

    if "time" in cp:
        s = cp["time"]
        t_end = s.get("t_end", None)
        fixed = s.get("fixed_dt", None)
        cfl = float(s.get("cfl", 0.4))
        if not 0.0 < cfl <= 1.0:
            raise ConfigError("time.cfl: cfl must be in (0, 1]")
        cfg.time = TimeSection(
            t_end=None if t_end is None else float(t_end), cfl=cfl,
            max_steps=int(s.get("max_steps", 10**9)),
            fixed_dt=None if fixed is None else float(fixed))
        if cfg.time.t_end is not None and cfg.time.t_end <= 0:
            raise ConfigError("time.t_end: t_end must be > 0")

    if "initial" in cp:
        cfg.initial = cp["initial"].get("kind", "flat_1d").strip()

    if "probes" in cp:
        s = cp["probes"]
        for key, value in s.items():
            if key == "cadence":
                cfg.probe_cadence = int(value)
                if cfg.probe_cadence < 1:
                    raise ConfigError("probes.cadence must be >= 1")
            else:
                cfg.probes[key] = _parse_floats(value, 3, f"probes.{key}")

    if "outputs" in cp:
        s = cp["outputs"]
        cfg.outputs = OutputSection(
            directory=s.get("directory", "out"),
            probe_csv=_parse_bool(s.get("probe_csv", "true"),
                                  "outputs.probe_csv"),
            entropy_csv=_parse_bool(s.get("entropy_csv", "false"),
                                    "outputs.entropy_csv"),
            entropy_cadence=int(s.get("entropy_cadence", 10)),
            step_log_every=int(s.get("step_log_every", 0)),
            snapshot_every=int(s.get("snapshot_every", 0)),
            manifest=_parse_bool(s.get("manifest", "true"),
                                 "outputs.manifest"))

    if "sweep" in cp:
        s = cp["sweep"]
        values = tuple(float(v) for v in s.get("values", "").split())
        cfg.sweep = SweepSpec(
            vary=s.get("vary", "order").strip(), values=values,
            reference=s.get("reference", "analytic").strip(),
            reference_order=(int(s["reference_order"])
                             if "reference_order" in s else None),
            reference_n_el=(int(s["reference_n_el"])
                            if "reference_n_el" in s else None))
        cfg.sweep.validate()

    return cfg


def serialize_config(cfg: CaseConfig) -> str:
    """Emit a document that parses back to an identical configuration."""
    out = io.StringIO()

    def section(name, rows):
        out.write(f"[{name}]\n")
        for key, value in rows:
            if value is None:
                continue
            out.write(f"{key} = {value}\n")
        out.write("\n")

    section("experiment", [
        ("type", cfg.experiment), ("theta_deg", _fmt(cfg.theta_deg)),
        ("analysis_periods", _fmt(cfg.analysis_periods))])
    p = cfg.phases
    section("phases", [(k, _fmt(getattr(p, k)))
                       for k in ("rho1", "rho2", "cs1", "cs2", "eta1", "eta2")])
    i = cfg.interface
    section("interface", [("sigma", _fmt(i.sigma)),
                          ("epsilon", _fmt(i.epsilon)),
                          ("mobility", _fmt(i.mobility))])
    s = cfg.source
    section("source", [
        ("kind", s.kind), ("frequency", _fmt(s.frequency)),
        ("width", _fmt(s.width)),
        ("center", " ".join(_fmt(v) for v in s.center)),
        ("gravity", " ".join(_fmt(v) for v in s.gravity)),
        ("enabled", _fmt(s.enabled))])
    m = cfg.mesh
    section("mesh", [
        ("extents", " ".join(_fmt(v) for pair in m.extents for v in pair)),
        ("counts", " ".join(str(c) for c in m.counts)),
        ("grading_axis", m.grading_axis),
        ("grading_plane", _fmt(m.grading_plane) if m.grading_axis is not None
         else None),
        ("grading_ratio", _fmt(m.grading_ratio) if m.grading_axis is not None
         else None)])
    section("solver", [("order", cfg.order), ("flux", cfg.flux)])
    section("boundaries", sorted(cfg.boundaries.items()))
    t = cfg.time
    section("time", [
        ("t_end", None if t.t_end is None else _fmt(t.t_end)),
        ("cfl", _fmt(t.cfl)), ("max_steps", t.max_steps),
        ("fixed_dt", None if t.fixed_dt is None else _fmt(t.fixed_dt))])
    section("initial", [("kind", cfg.initial)])
    probe_rows = [("cadence", cfg.probe_cadence)]
    probe_rows += [(k, " ".join(_fmt(v) for v in pos))
                   for k, pos in sorted(cfg.probes.items())]
    section("probes", probe_rows)
    o = cfg.outputs
    section("outputs", [
        ("directory", o.directory), ("probe_csv", _fmt(o.probe_csv)),
        ("entropy_csv", _fmt(o.entropy_csv)),
        ("entropy_cadence", o.entropy_cadence),
        ("step_log_every", o.step_log_every),
        ("snapshot_every", o.snapshot_every),
        ("manifest", _fmt(o.manifest))])
    if cfg.sweep.values:
        section("sweep", [
            ("vary", cfg.sweep.vary),
            ("values", " ".join(_fmt(v) for v in cfg.sweep.values)),
            ("reference", cfg.sweep.reference),
            ("reference_order", cfg.sweep.reference_order),
            ("reference_n_el", cfg.sweep.reference_n_el)])
    return out.getvalue()


def with_overrides(cfg: CaseConfig, order=None, n_el=None, epsilon=None,
                   frequency=None, theta=None, flux=None) -> CaseConfig:
    """Apply CLI-style overrides, revalidating the touched values."""
    out = replace(cfg)
    if order is not None:
        if order < 1:
            raise ConfigError("--order must be >= 1")
        out.order = int(order)
    if n_el is not None:
        if n_el < 1:
            raise ConfigError("--nel must be >= 1")
        counts = list(out.mesh.counts)
        counts[0] = int(n_el)
        if out.mesh.counts[1] > 1:
            counts[1] = int(n_el)
        out.mesh = replace(out.mesh, counts=tuple(counts))
    if epsilon is not None:
        out.interface = InterfaceParams(
            sigma=out.interface.sigma, epsilon=float(epsilon),
            mobility=out.interface.mobility)
    if frequency is not None:
        out.source = replace(out.source, frequency=float(frequency))
    if theta is not None:
        out.theta_deg = float(theta)
    if flux is not None:
        if flux not in ("central", "ers"):
            raise ConfigError("--flux must be 'central' or 'ers'")
        out.flux = flux
    return out
