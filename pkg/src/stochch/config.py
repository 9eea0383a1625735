"""Run configuration: TOML text with dotted section keys.

A minimal file::

    seed = 1
    galerkin.N = [4, 8, 16]
    galerkin.N_ref = 64
    time.dt = 1e-4
    time.T = 0.1
    diffusion.kind = "constant"
    diffusion.sigma = 1.0

Unknown keys are rejected so a typo never silently falls back to a default.
"""

import copy
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dynamics import DIFFUSION_KINDS, DiffusionSpec, Potential
from .errors import ConfigurationError
from .experiments import NORM_ALPHA, parse_quantity
from .integrators import SCHEMES, SchemeConfig
from .spectral import SpectralSpace

EXPERIMENTS = ("simulate", "convergence", "temporal", "moments", "lyapunov", "profile")
INITIAL_KINDS = ("modes", "bump", "file")

# section -> {key: default}; REQUIRED marks keys without a default
REQUIRED = object()
SCHEMA = {
    "": {"seed": 0},
    "domain": {"L": math.pi},
    "potential": {"enabled": True, "c4": 0.25, "c3": 0.0, "c2": -0.5, "c1": 0.0, "c0": 0.25},
    "diffusion": {"kind": REQUIRED, "sigma": 0.0, "alpha": 0.0},
    "initial": {"kind": "modes", "modes": [[1, 1.0]], "center": None, "width": None,
                "amplitude": 1.0, "path": None},
    "galerkin": {"N": REQUIRED, "N_ref": None, "mg_factor": 4, "k_factor": 4, "K": None},
    "time": {"dt": REQUIRED, "T": REQUIRED, "scheme": "exp_euler", "record_every": 0},
    "experiment": {"kind": None, "paths": 16, "norm": ["H"], "lags": None, "n_lags": 10,
                   "gammas": [0.5, 1.0, 1.5, 2.0], "beta": 1.0, "c": 0.1,
                   "quantities": ["sup-H-2", "sup-H1-2", "sup-E-2"], "sup_error": False,
                   "path": 0},
    "acceptance": {"max_slope": None, "min_slope": None, "min_r2": None,
                   "max_ratio": None},
    "output": {"directory": "out", "formats": ["csv"]},
}

# grid used to project bump and file initial data, independent of N so that
# every resolution sees the same function
_IC_GRID = 8191


@dataclass(frozen=True)
class InitialCondition:
    """``X_0`` given by sine modes, a smooth bump, or grid samples from a file.

    Modes satisfy the boundary conditions by construction; bump and file data
    are projected onto the basis with a fixed fine quadrature.
    """

    kind: str
    modes: tuple = ()
    center: float = 0.0
    width: float = 1.0
    amplitude: float = 1.0
    samples: tuple = ()

    def __post_init__(self):
        if self.kind not in INITIAL_KINDS:
            raise ConfigurationError(f"initial.kind must be one of {INITIAL_KINDS}, got {self.kind!r}")
        if self.kind == "bump" and not self.width > 0:
            raise ConfigurationError(f"initial.width must be positive, got {self.width}")

    def _profile(self, x, L):
        if self.kind == "bump":
            r = (x - self.center) / self.width
            out = np.zeros_like(x)
            inside = np.abs(r) < 1
            out[inside] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
            return out
        xs, us = (np.asarray(a, dtype=np.float64) for a in self.samples)
        # pin the Dirichlet values before interpolating
        xs = np.concatenate([[0.0], xs, [L]])
        us = np.concatenate([[0.0], us, [0.0]])
        return np.interp(x, xs, us)

    def coefficients(self, space):
        out = np.zeros(space.N)
        if self.kind == "modes":
            for j, amp in self.modes:
                if j <= space.N:
                    out[j - 1] += amp
            return out
        fine = SpectralSpace(space.L, space.N, max(_IC_GRID, space.M_g))
        return fine.project(self._profile(np.asarray(fine.grid), space.L))


@dataclass
class RunConfig:
    seed: int
    L: float
    potential: Potential
    diffusion: DiffusionSpec
    initial: InitialCondition
    Ns: list
    N_ref: int
    mg_factor: int
    K: int
    scheme: SchemeConfig
    experiment: dict
    acceptance: dict
    output: dict
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def N(self):
        return self.Ns[0]

    @property
    def stiffness(self):
        """``dt * lambda_max^2`` at the finest resolution, a diagnostic for the step size."""
        n = self.N_ref or max(self.Ns)
        return self.scheme.dt * (n * math.pi / self.L) ** 4

    def with_seed(self, seed):
        raw = copy.deepcopy(self.raw)
        raw[""]["seed"] = seed
        return build_config(raw)

    def config_hash(self):
        """SHA-256 of the resolved settings; the output block does not enter it."""
        payload = {k: v for k, v in self.raw.items() if k != "output"}
        text = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=repr)
        return hashlib.sha256(text.encode()).hexdigest()

    def echo(self):
        out = {}
        for section, values in self.raw.items():
            if section:
                out[section] = dict(values)
            else:
                out.update(values)
        return out


def _flatten(doc):
    """Split a parsed TOML document into ``{section: {key: value}}``, rejecting unknown keys."""
    out = {s: {} for s in SCHEMA}
    for key, value in doc.items():
        if isinstance(value, dict):
            if key not in SCHEMA or not key:
                raise ConfigurationError(f"unknown config section {key!r}")
            for sub, v in value.items():
                if sub not in SCHEMA[key]:
                    raise ConfigurationError(f"unknown config key {key}.{sub}")
                if isinstance(v, dict):
                    raise ConfigurationError(f"config key {key}.{sub} cannot be a table")
                out[key][sub] = v
        elif key in SCHEMA[""]:
            out[""][key] = value
        else:
            raise ConfigurationError(f"unknown config key {key!r}")
    return out


def _fill_defaults(sections):
    resolved = {}
    for section, keys in SCHEMA.items():
        resolved[section] = {}
        for key, default in keys.items():
            if key in sections.get(section, {}):
                resolved[section][key] = sections[section][key]
            elif default is REQUIRED:
                name = f"{section}.{key}" if section else key
                raise ConfigurationError(f"missing required config key {name}")
            else:
                resolved[section][key] = copy.deepcopy(default)
    return resolved


def _as_list(value):
    return list(value) if isinstance(value, (list, tuple)) else [value]


def _int(value, name):
    if isinstance(value, bool) or int(value) != value:
        raise ConfigurationError(f"{name} must be an integer, got {value!r}")
    return int(value)


def _initial(sec):
    kind = sec["kind"]
    if kind == "modes":
        modes = []
        for item in sec["modes"]:
            if len(item) != 2:
                raise ConfigurationError(f"initial.modes entries are [j, amplitude], got {item!r}")
            j = _int(item[0], "initial.modes index")
            if j < 1:
                raise ConfigurationError(f"initial.modes index must be >= 1, got {j}")
            modes.append((j, float(item[1])))
        return InitialCondition("modes", tuple(modes))
    if kind == "bump":
        if sec["center"] is None or sec["width"] is None:
            raise ConfigurationError("a bump initial condition needs initial.center and initial.width")
        return InitialCondition("bump", center=float(sec["center"]), width=float(sec["width"]),
                                amplitude=float(sec["amplitude"]))
    if kind == "file":
        if not sec["path"]:
            raise ConfigurationError("a file initial condition needs initial.path")
        try:
            data = np.loadtxt(sec["path"], comments="#", ndmin=2, delimiter=None)
        except OSError as exc:
            raise ConfigurationError(f"cannot read initial.path: {exc}") from exc
        if data.shape[1] != 2:
            raise ConfigurationError("initial condition files need two columns: x and u(x)")
        return InitialCondition("file", samples=(tuple(data[:, 0]), tuple(data[:, 1])))
    raise ConfigurationError(f"initial.kind must be one of {INITIAL_KINDS}, got {kind!r}")


def build_config(sections):
    """Validate already-split sections into a :class:`RunConfig`."""
    r = _fill_defaults(sections)
    seed = _int(r[""]["seed"], "seed")
    if not 0 <= seed < 2 ** 64:
        raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {seed}")
    L = float(r["domain"]["L"])
    if not L > 0:
        raise ConfigurationError(f"domain.L must be positive, got {L}")

    p = r["potential"]
    pot = Potential(float(p["c4"]), float(p["c3"]), float(p["c2"]), float(p["c1"]),
                    float(p["c0"])) if p["enabled"] else None

    d = r["diffusion"]
    if d["kind"] not in DIFFUSION_KINDS:
        raise ConfigurationError(f"diffusion.kind must be one of {DIFFUSION_KINDS}, got {d['kind']!r}")
    spec = DiffusionSpec(d["kind"], float(d["sigma"]), float(d["alpha"]))

    g = r["galerkin"]
    Ns = [_int(n, "galerkin.N") for n in _as_list(g["N"])]
    if not Ns or min(Ns) < 1:
        raise ConfigurationError(f"galerkin.N must hold positive integers, got {g['N']!r}")
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ConfigurationError(f"galerkin.N must be strictly increasing, got {Ns}")
    N_ref = None if g["N_ref"] is None else _int(g["N_ref"], "galerkin.N_ref")
    if N_ref is not None and N_ref <= max(Ns):
        raise ConfigurationError(
            f"galerkin.N_ref={N_ref} must exceed every galerkin.N (max {max(Ns)})")
    mg_factor = _int(g["mg_factor"], "galerkin.mg_factor")
    if mg_factor < 3:
        raise ConfigurationError(
            f"galerkin.mg_factor={mg_factor} violates the dealiasing requirement M_g >= 3N")
    top = N_ref or max(Ns)
    K = _int(g["K"], "galerkin.K") if g["K"] is not None else _int(g["k_factor"], "galerkin.k_factor") * top
    if K < top:
        raise ConfigurationError(
            f"galerkin.K={K} must be at least the finest resolution "
            f"{'galerkin.N_ref' if N_ref else 'galerkin.N'}={top}")

    t = r["time"]
    if t["scheme"] not in SCHEMES:
        raise ConfigurationError(f"time.scheme must be one of {SCHEMES}, got {t['scheme']!r}")
    scheme = SchemeConfig(float(t["dt"]), float(t["T"]), K, t["scheme"],
                          _int(t["record_every"], "time.record_every"))

    e = dict(r["experiment"])
    if e["kind"] is not None and e["kind"] not in EXPERIMENTS:
        raise ConfigurationError(f"experiment.kind must be one of {EXPERIMENTS}, got {e['kind']!r}")
    e["paths"] = _int(e["paths"], "experiment.paths")
    if e["paths"] < 1:
        raise ConfigurationError("experiment.paths must be positive")
    e["norm"] = _as_list(e["norm"])
    for n in e["norm"]:
        if n not in NORM_ALPHA:
            raise ConfigurationError(f"experiment.norm must be in {sorted(NORM_ALPHA)}, got {n!r}")
    for q in e["quantities"]:
        parse_quantity(q, gamma=1.0)
    for gm in e["gammas"]:
        if not 0 < gm <= 2:
            raise ConfigurationError(f"experiment.gammas must lie in (0, 2], got {gm}")
    if e["path"] >= e["paths"]:
        raise ConfigurationError(
            f"experiment.path={e['path']} must be below experiment.paths={e['paths']}")

    return RunConfig(seed, L, pot, spec, _initial(r["initial"]), Ns, N_ref, mg_factor, K,
                     scheme, e, dict(r["acceptance"]), dict(r["output"]), r)


def parse_config(text):
    """Parse and validate configuration text."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"malformed config: {exc}") from exc
    return build_config(_flatten(doc))


def load_config(path):
    return parse_config(Path(path).read_text(encoding="utf-8"))
