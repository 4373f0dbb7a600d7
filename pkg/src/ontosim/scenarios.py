"""Scenario descriptions and the builders for the canonical set-ups.

A scenario file is an INI document (``configparser`` syntax)::

    [scenario]   name, kind, mode, seed, runtime_budget_s
    [grid]       n_particles, extent_min, extent_max, points
    [state]      initial-state parameters, see the builder for ``kind``
    [dynamics]   dt, t_final, steps_per_output
    [bohm]       n_traj, bins, save_trajectories
    [grw]        lambda | lambda_si, sigma | sigma_si, length_unit_m,
                 mass_unit_kg, measurement_time, measured_particle

``kind`` picks the builder (double_slit, einstein_box, entangled_pair,
harmonic_trap) and ``mode`` the dynamics (schrodinger, bohm, grwm, grwf).
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import constants

from .errors import ConfigError, InvalidGeometry
from .grid import GridSpec, PotentialField, WaveFunction, gaussian_packet, normalize
from .grw import GrwParams, NaturalUnits

MODES = ("schrodinger", "bohm", "grwm", "grwf")

_SECTIONS = {
    "scenario": {"name": str, "kind": str, "mode": str, "seed": int, "runtime_budget_s": float},
    "grid": {"n_particles": int, "extent_min": float, "extent_max": float, "points": int, "max_points": int},
    "dynamics": {"dt": float, "t_final": float, "steps_per_output": int},
    "bohm": {"n_traj": int, "bins": int, "save_trajectories": int},
    "grw": {
        "lambda": float,
        "sigma": float,
        "lambda_si": float,
        "sigma_si": float,
        "length_unit_m": float,
        "mass_unit_kg": float,
        "measurement_time": float,
        "measured_particle": int,
    },
}

# Initial-state parameters per kind with their defaults.
_STATE = {
    "double_slit": {
        "slit_separation": 10.0,
        "slit_width": 1.0,
        "forward_momentum": 5.0,
        "relative_phase": 0.0,
        "amplitude_left": 1.0,
        "amplitude_right": 1.0,
        "mass": 1.0,
    },
    "einstein_box": {"half_separation": 75.0, "well_width": 0.2, "offset": 0.0, "mass": 1.0},
    "entangled_pair": {"half_separation": 4.0, "packet_width": 0.5, "momentum": 1.0, "mass": 1.0, "product": 0.0},
    "harmonic_trap": {"omega": 1.0, "x0": 0.0, "p0": 0.0, "mass": 1.0},
}

_REQUIRED_PARTICLES = {"entangled_pair": 2}


def _parse(section, key, raw, typ):
    try:
        if typ is int:
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        return typ(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r} as {typ.__name__}") from None


@dataclass
class ScenarioSpec:
    name: str
    kind: str
    mode: str
    grid: GridSpec
    state: dict
    seed: int = 0
    dt: float = 1e-3
    t_final: float = 1.0
    steps_per_output: int = 100
    n_traj: int = 1000
    bins: int = 32
    save_trajectories: int = 100
    grw: dict = field(default_factory=dict)
    runtime_budget_s: float = 300.0

    def __post_init__(self):
        self.validate()

    # -- validation ---------------------------------------------------------
    def validate(self):
        if self.mode not in MODES:
            raise ConfigError("scenario.mode", f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if self.kind not in _STATE:
            raise ConfigError("scenario.kind", f"unknown kind {self.kind!r}; expected one of {', '.join(_STATE)}")
        need = _REQUIRED_PARTICLES.get(self.kind)
        if need and self.grid.n_particles != need:
            raise ConfigError("grid.n_particles", f"{self.kind} needs {need} particles")
        unknown = set(self.state) - set(_STATE[self.kind])
        if unknown:
            raise ConfigError(f"state.{sorted(unknown)[0]}", f"not a parameter of {self.kind}")
        if not self.dt > 0:
            raise ConfigError("dynamics.dt", "must be > 0")
        if not self.t_final >= 0:
            raise ConfigError("dynamics.t_final", "must be >= 0")
        if self.steps_per_output < 1:
            raise ConfigError("dynamics.steps_per_output", "must be >= 1")
        if self.n_traj < 1:
            raise ConfigError("bohm.n_traj", "must be >= 1")
        if self.bins < 2:
            raise ConfigError("bohm.bins", "must be >= 2")
        if self.save_trajectories < 0:
            raise ConfigError("bohm.save_trajectories", "must be >= 0")
        if self.state_value("mass") <= 0:
            raise ConfigError("state.mass", "must be > 0")
        if self.mode in ("grwm", "grwf"):
            self.grw_params()
            mt = self.grw.get("measurement_time")
            if mt is not None and not 0 <= mt <= self.t_final:
                raise ConfigError("grw.measurement_time", "must lie within [0, t_final]")
            mp = self.grw.get("measured_particle", 0)
            if not 0 <= mp < self.grid.n_particles:
                raise ConfigError("grw.measured_particle", f"must be in [0, {self.grid.n_particles})")

    def state_value(self, key):
        return float(self.state.get(key, _STATE[self.kind][key]))

    def units(self) -> NaturalUnits:
        return NaturalUnits(
            self.grw.get("length_unit_m", 1e-7), self.grw.get("mass_unit_kg", constants.m_e)
        )

    def grw_params(self) -> GrwParams:
        g = self.grw
        units = self.units()
        if "lambda" in g and "lambda_si" in g:
            raise ConfigError("grw.lambda", "give either lambda or lambda_si, not both")
        if "sigma" in g and "sigma_si" in g:
            raise ConfigError("grw.sigma", "give either sigma or sigma_si, not both")
        lam = g["lambda"] if "lambda" in g else units.rate_from_si(g["lambda_si"]) if "lambda_si" in g else None
        sig = g["sigma"] if "sigma" in g else units.length_from_si(g["sigma_si"]) if "sigma_si" in g else None
        if lam is None:
            raise ConfigError("grw.lambda", "missing (give lambda or lambda_si)")
        if sig is None:
            raise ConfigError("grw.sigma", "missing (give sigma or sigma_si)")
        if not lam > 0:
            raise ConfigError("grw.lambda", f"must be > 0, got {lam!r}")
        if not sig > 0:
            raise ConfigError("grw.sigma", f"must be > 0, got {sig!r}")
        return GrwParams(lam, sig, self.seed)

    # -- (de)serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid"] = {
            "n_particles": self.grid.n_particles,
            "extent_min": self.grid.extent_min,
            "extent_max": self.grid.extent_max,
            "points": self.grid.points_per_axis,
            "max_points": self.grid.max_points,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        d = dict(d)
        gd = d.pop("grid")
        d["grid"] = _make_grid(gd)
        return cls(**d)

    @classmethod
    def from_config(cls, source, overrides: dict | None = None) -> "ScenarioSpec":
        """Parse an INI file (path) or INI text; ``overrides`` maps ``section.key`` to values."""
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and Path(source).exists()):
                with open(source) as fh:
                    cp.read_file(fh)
            else:
                cp.read_string(str(source))
        except configparser.Error as exc:
            raise ConfigError("config", f"malformed config: {exc}") from None
        raw = {s: dict(cp.items(s)) for s in cp.sections()}
        for dotted, value in (overrides or {}).items():
            sec, key = dotted.split(".", 1)
            raw.setdefault(sec, {})[key] = str(value)
        return cls._from_raw(raw)

    @classmethod
    def _from_raw(cls, raw: dict) -> "ScenarioSpec":
        for sec in raw:
            if sec not in _SECTIONS and sec != "state":
                raise ConfigError(sec, "unknown section")
        typed = {}
        for sec, schema in _SECTIONS.items():
            typed[sec] = {}
            for key, val in raw.get(sec, {}).items():
                if key not in schema:
                    raise ConfigError(f"{sec}.{key}", "unknown key")
                typed[sec][key] = _parse(sec, key, val, schema[key])
        sc = typed["scenario"]
        for key in ("name", "kind", "mode"):
            if key not in sc:
                raise ConfigError(f"scenario.{key}", "missing")
        kind = sc["kind"]
        state = {k: _parse("state", k, v, float) for k, v in raw.get("state", {}).items()}
        grid = _make_grid(typed["grid"])
        dyn = typed["dynamics"]
        bohm = typed["bohm"]
        return cls(
            name=sc["name"],
            kind=kind,
            mode=sc["mode"],
            grid=grid,
            state=state,
            seed=sc.get("seed", 0),
            dt=dyn.get("dt", 1e-3),
            t_final=dyn.get("t_final", 1.0),
            steps_per_output=dyn.get("steps_per_output", 100),
            n_traj=bohm.get("n_traj", 1000),
            bins=bohm.get("bins", 32),
            save_trajectories=bohm.get("save_trajectories", 100),
            grw=typed["grw"],
            runtime_budget_s=sc.get("runtime_budget_s", 300.0),
        )


def _make_grid(gd: dict) -> GridSpec:
    for key in ("n_particles", "extent_min", "extent_max", "points"):
        if key not in gd:
            raise ConfigError(f"grid.{key}", "missing")
    kwargs = {"max_points": gd["max_points"]} if gd.get("max_points") else {}
    try:
        return GridSpec(gd["n_particles"], gd["extent_min"], gd["extent_max"], gd["points"], **kwargs)
    except ValueError as exc:
        field_ = "grid.points" if "points" in str(exc) else "grid"
        raise ConfigError(field_, str(exc)) from None


def bundled_configs() -> list[str]:
    return sorted(p.name for p in resources.files("ontosim").joinpath("data").iterdir() if p.name.endswith(".cfg"))


def bundled_config_text(name: str) -> str:
    if not name.endswith(".cfg"):
        name += ".cfg"
    return resources.files("ontosim").joinpath("data", name).read_text()


def load_bundled(name: str, **overrides) -> ScenarioSpec:
    """Load a bundled scenario; keyword overrides use ``section__key`` names."""
    ov = {k.replace("__", "."): v for k, v in overrides.items()}
    return ScenarioSpec.from_config(bundled_config_text(name), ov)


# -- builders -------------------------------------------------------------------


def _check_margin(grid: GridSpec, centers, width: float, what: str):
    lo = grid.extent_min + 5 * width
    hi = grid.extent_max - 5 * width
    for c in centers:
        if not lo <= c <= hi:
            raise InvalidGeometry(f"{what}: packet at {c:g} (width {width:g}) is within 5 widths of the boundary")


def _overlap(f, g, dx) -> float:
    return abs(np.vdot(f, g)) * dx / np.sqrt(np.vdot(f, f).real * dx * np.vdot(g, g).real * dx)


def build_double_slit(spec: ScenarioSpec):
    """Post-slit transverse state of a two-slit experiment.

    The transverse coordinate is simulated; the forward motion at momentum
    ``forward_momentum`` only converts the screen distance ``L`` into the
    flight time ``t = m L / forward_momentum``.  Each slit of width ``w`` emits
    a Gaussian packet of std ``w / 2`` centered on the slit, the two packets
    sharing the forward phase and differing by ``relative_phase``.
    """
    g = spec.grid
    if g.n_particles != 1:
        raise ConfigError("grid.n_particles", "double_slit needs 1 particle")
    d = spec.state_value("slit_separation")
    w = spec.state_value("slit_width")
    k0 = spec.state_value("forward_momentum")
    if d <= 0:
        raise ConfigError("state.slit_separation", "must be > 0")
    if w <= 0:
        raise ConfigError("state.slit_width", "must be > 0")
    if k0 <= 0:
        raise ConfigError("state.forward_momentum", "must be > 0")
    s0 = w / 2
    x = g.axis
    left = spec.state_value("amplitude_left") * gaussian_packet(x, -d / 2, s0)
    right = spec.state_value("amplitude_right") * np.exp(1j * spec.state_value("relative_phase")) * gaussian_packet(x, d / 2, s0)
    _check_margin(g, (-d / 2, d / 2), s0, "double_slit")
    if np.any(left) and np.any(right) and _overlap(left, right, g.spacing) > 0.1:
        raise InvalidGeometry("double_slit: slit packets overlap by more than 10%")
    psi = normalize(WaveFunction(g, left + right))
    return psi, PotentialField.free(g), np.full(1, spec.state_value("mass"))


def double_slit_fringe_spacing(spec: ScenarioSpec, t: float) -> float:
    """Far-field two-source fringe spacing ``2 pi t / (m d)``."""
    return 2 * np.pi * t / (spec.state_value("mass") * spec.state_value("slit_separation"))


def build_einstein_box(spec: ScenarioSpec):
    """One particle split evenly between two distant harmonic wells.

    Each half is the ground state of its well (std ``well_width``), shifted
    by ``offset`` inside the well so the halves oscillate.
    """
    g = spec.grid
    a = spec.state_value("half_separation")
    w = spec.state_value("well_width")
    m = spec.state_value("mass")
    off = spec.state_value("offset")
    if a <= 0:
        raise ConfigError("state.half_separation", "must be > 0")
    if w <= 0:
        raise ConfigError("state.well_width", "must be > 0")
    if g.n_particles != 1:
        raise ConfigError("grid.n_particles", "einstein_box needs 1 particle")
    if abs(off) + 5 * w >= a:
        raise InvalidGeometry("einstein_box: half-box supports overlap")
    omega = 1.0 / (2 * m * w**2)
    x = g.axis
    left = gaussian_packet(x, -a + off, w)
    right = gaussian_packet(x, a + off, w)
    _check_margin(g, (-a + off, a + off), w, "einstein_box")
    if spec.mode in ("grwm", "grwf") and 3 * spec.grw_params().sigma > a:
        raise InvalidGeometry("einstein_box: collapse width sigma must be well below the half separation (3 sigma <= a)")
    psi = normalize(WaveFunction(g, left + right))
    return psi, PotentialField.double_well(g, omega, a, m), np.full(1, m)


def entangled_pair_factors(spec: ScenarioSpec):
    g = spec.grid
    a = spec.state_value("half_separation")
    s = spec.state_value("packet_width")
    k = spec.state_value("momentum")
    if a <= 0:
        raise ConfigError("state.half_separation", "must be > 0")
    if s <= 0:
        raise ConfigError("state.packet_width", "must be > 0")
    x = g.axis
    f = gaussian_packet(x, -a, s, -k)
    h = gaussian_packet(x, a, s, k)
    _check_margin(g, (-a, a), s, "entangled_pair")
    return f, h


def build_entangled_pair(spec: ScenarioSpec):
    """Two particles in ``f(x1) g(x2) + g(x1) f(x2)``, packets at ``-+a`` moving apart.

    With ``product = 1`` the control state ``f(x1) g(x2)`` is built instead.
    """
    g = spec.grid
    f, h = entangled_pair_factors(spec)
    if _overlap(f, h, g.spacing) > 1e-6:
        raise InvalidGeometry("entangled_pair: packets are not orthogonal (overlap > 1e-6)")
    amp = np.multiply.outer(f, h)
    if not spec.state_value("product"):
        amp = amp + np.multiply.outer(h, f)
    psi = normalize(WaveFunction(g, amp))
    return psi, PotentialField.free(g), np.full(2, spec.state_value("mass"))


def build_harmonic_trap(spec: ScenarioSpec):
    """Coherent state (identical for every particle) in a harmonic trap."""
    g = spec.grid
    omega = spec.state_value("omega")
    m = spec.state_value("mass")
    if omega <= 0:
        raise ConfigError("state.omega", "must be > 0")
    x0, p0 = spec.state_value("x0"), spec.state_value("p0")
    s = 1 / np.sqrt(2 * m * omega)
    _check_margin(g, (x0, x0 + p0 / (m * omega), x0 - p0 / (m * omega)), s, "harmonic_trap")
    one = gaussian_packet(g.axis, x0, s) * np.exp(1j * p0 * (g.axis - x0))
    amp = one
    for _ in range(1, g.n_particles):
        amp = np.multiply.outer(amp, one)
    psi = normalize(WaveFunction(g, amp))
    return psi, PotentialField.harmonic(g, omega, m), np.full(g.n_particles, m)


BUILDERS = {
    "double_slit": build_double_slit,
    "einstein_box": build_einstein_box,
    "entangled_pair": build_entangled_pair,
    "harmonic_trap": build_harmonic_trap,
}


def build(spec: ScenarioSpec):
    return BUILDERS[spec.kind](spec)
