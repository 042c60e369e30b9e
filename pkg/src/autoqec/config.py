"""Experiment configuration: strict TOML parsing and initial-state presets.

Config files are TOML with a fixed schema; unknown keys are hard errors (a
silently ignored typo in a physics rate is worse than a failed run).  Errors
carry the offending line number when it can be located.

Schema::

    scheme = "effective3q"            # one of SCHEMES
    initial_state = "psi0"            # see below
    outputs = ["fidelity"]            # observable names
    output_dir = "runs/demo"          # optional, CLI --out overrides

    [params]                          # physical rates, see models.Params
    gamma = 1.0
    kappa = 500.0
    omega_p = 100.0

    [propagation]
    t_final = 2.0
    n_samples = 101                   # or: sample_times = [0.0, ...]
    method = "adaptive"               # or "rk4"
    abs_tol = 1e-9
    rel_tol = 1e-7
    max_step = 0.5                    # optional

    [trajectories]                    # optional; presence selects Monte-Carlo
    n_traj = 2000
    seed = 42
    jump_tol = 1e-10

Initial states (qubit registers; cavities always start in vacuum):
``psi0`` (the protected superposition ``(|0..0> - |1..1>)/sqrt(2)``),
``codeword0``, ``single-flip(i)`` (1-based qubit index), ``pattern(bits)``
and ``superposition(bits_a, bits_b, c0, c1)``.

Observables: ``fidelity`` (to the initial state), ``codespace_distance``,
``logical_coherence``, ``population:<bits>`` and ``photons:<cavity label>``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import numpy as np
import scipy.sparse as sp

from .hilbert import Operator, PureState
from .integrator import Observable, PropagationConfig, TrajectoryConfig
from .models import (
    LindbladModel,
    Params,
    build_effective_3q,
    build_single_cavity_3q,
    build_star_effective,
    build_star_multiplexed,
    build_tierB_3q,
    build_tierC_3q,
    build_unprotected_qubit,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "SCHEMES",
    "load_config",
    "build_model",
    "build_initial_state",
    "build_observables",
]


class ConfigError(Exception):
    """Invalid configuration; carries a best-effort line number."""

    def __init__(self, message: str, line: int | None = None) -> None:
        super().__init__(message)
        self.line = line


SCHEMES = {
    "effective3q": build_effective_3q,
    "tierB3q": build_tierB_3q,
    "tierC3q": build_tierC_3q,
    "singleCavity3q": build_single_cavity_3q,
    "starEffective": build_star_effective,
    "starMultiplexed": build_star_multiplexed,
    "unprotectedQubit": build_unprotected_qubit,
}

_TOP_KEYS = {"scheme", "initial_state", "outputs", "output_dir", "params", "propagation", "trajectories"}
_PARAM_KEYS = {
    "gamma", "kappa", "omega_p", "chi", "j_circ",
    "gamma_c_outer", "gamma_c_central", "switch_period", "cavity_dim",
}
_PROP_KEYS = {"t_final", "sample_times", "n_samples", "method", "abs_tol", "rel_tol", "max_step"}
_TRAJ_KEYS = {"n_traj", "seed", "jump_tol"}

# params that must be stated explicitly for each scheme
_REQUIRED_PARAMS = {
    "effective3q": {"kappa", "omega_p"},
    "tierB3q": {"gamma", "kappa", "omega_p"},
    "tierC3q": {"gamma", "kappa", "omega_p", "chi"},
    "singleCavity3q": {"kappa", "omega_p"},
    "starEffective": set(),
    "starMultiplexed": set(),
    "unprotectedQubit": {"gamma"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    scheme: str
    params: Params
    initial_state: str
    propagation: PropagationConfig
    trajectories: TrajectoryConfig | None
    outputs: tuple[str, ...]
    output_dir: str | None
    source: str

    def with_params(self, **updates) -> "ExperimentConfig":
        return replace(self, params=replace(self.params, **updates))

    def with_seed(self, seed: int) -> "ExperimentConfig":
        if self.trajectories is None:
            return self
        return replace(self, trajectories=replace(self.trajectories, seed=seed))


def _find_line(text: str, key: str) -> int | None:
    pattern = re.compile(rf"^\s*(\[.*)?[\"']?{re.escape(key)}[\"']?\s*[=\].]", re.MULTILINE)
    match = pattern.search(text)
    if match is None:
        loose = re.compile(rf"^.*\b{re.escape(key)}\b", re.MULTILINE)
        match = loose.search(text)
        if match is None:
            return None
    return text.count("\n", 0, match.start()) + 1


def _reject_unknown(table: dict, allowed: set[str], where: str, text: str) -> None:
    for key in table:
        if key not in allowed:
            raise ConfigError(
                f"unknown key {key!r} in {where} (allowed: {', '.join(sorted(allowed))})",
                line=_find_line(text, key),
            )


def _expect(table: dict, key: str, types, where: str, text: str, default=None, required=False):
    if key not in table:
        if required:
            raise ConfigError(f"missing required key {key!r} in {where}", line=_find_line(text, where.strip("[]")))
        return default
    value = table[key]
    if not isinstance(value, types):
        type_names = types.__name__ if isinstance(types, type) else "/".join(t.__name__ for t in types)
        raise ConfigError(
            f"key {key!r} in {where} must be {type_names}, got {type(value).__name__}",
            line=_find_line(text, key),
        )
    return value


def load_config(path) -> ExperimentConfig:
    """Parse and validate a TOML experiment configuration."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = None
        match = re.search(r"line (\d+)", str(exc))
        if match:
            line = int(match.group(1))
        raise ConfigError(f"TOML syntax error: {exc}", line=line) from exc

    _reject_unknown(data, _TOP_KEYS, "the top level", text)

    scheme = _expect(data, "scheme", str, "the top level", text, required=True)
    if scheme not in SCHEMES:
        raise ConfigError(
            f"unknown scheme {scheme!r} (one of: {', '.join(sorted(SCHEMES))})",
            line=_find_line(text, "scheme"),
        )

    raw_params = _expect(data, "params", dict, "the top level", text, default={})
    _reject_unknown(raw_params, _PARAM_KEYS, "[params]", text)
    for key, value in raw_params.items():
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(
                f"key {key!r} in [params] must be a number",
                line=_find_line(text, key),
            )
    missing = _REQUIRED_PARAMS[scheme] - set(raw_params)
    if missing:
        raise ConfigError(
            f"scheme {scheme!r} requires params: {', '.join(sorted(missing))}",
            line=_find_line(text, "params") or _find_line(text, "scheme"),
        )
    if scheme in ("starEffective", "starMultiplexed"):
        if "gamma_c_outer" not in raw_params and not {"kappa", "omega_p"} <= set(raw_params):
            raise ConfigError(
                f"scheme {scheme!r} needs gamma_c_outer or both kappa and omega_p",
                line=_find_line(text, "params") or _find_line(text, "scheme"),
            )
    if "cavity_dim" in raw_params:
        raw_params = dict(raw_params)
        raw_params["cavity_dim"] = int(raw_params["cavity_dim"])
    try:
        params = Params(**raw_params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [params]: {exc}", line=_find_line(text, "params")) from exc

    raw_prop = _expect(data, "propagation", dict, "the top level", text, required=True)
    _reject_unknown(raw_prop, _PROP_KEYS, "[propagation]", text)
    t_final = float(_expect(raw_prop, "t_final", (int, float), "[propagation]", text, required=True))
    if "sample_times" in raw_prop and "n_samples" in raw_prop:
        raise ConfigError(
            "give either sample_times or n_samples, not both",
            line=_find_line(text, "sample_times"),
        )
    if "sample_times" in raw_prop:
        samples = tuple(float(t) for t in _expect(raw_prop, "sample_times", list, "[propagation]", text))
    else:
        n_samples = int(_expect(raw_prop, "n_samples", int, "[propagation]", text, default=101))
        samples = tuple(np.linspace(0.0, t_final, n_samples))
    kwargs = {}
    if "method" in raw_prop:
        kwargs["method"] = _expect(raw_prop, "method", str, "[propagation]", text)
    if "abs_tol" in raw_prop:
        kwargs["abs_tol"] = float(_expect(raw_prop, "abs_tol", (int, float), "[propagation]", text))
    if "rel_tol" in raw_prop:
        kwargs["rel_tol"] = float(_expect(raw_prop, "rel_tol", (int, float), "[propagation]", text))
    if "max_step" in raw_prop:
        kwargs["max_step"] = float(_expect(raw_prop, "max_step", (int, float), "[propagation]", text))
    try:
        propagation = PropagationConfig(t_final, samples, **kwargs)
    except ValueError as exc:
        raise ConfigError(f"invalid [propagation]: {exc}", line=_find_line(text, "propagation")) from exc

    trajectories = None
    if "trajectories" in data:
        raw_traj = _expect(data, "trajectories", dict, "the top level", text)
        _reject_unknown(raw_traj, _TRAJ_KEYS, "[trajectories]", text)
        try:
            trajectories = TrajectoryConfig(
                n_traj=int(_expect(raw_traj, "n_traj", int, "[trajectories]", text, required=True)),
                seed=int(_expect(raw_traj, "seed", int, "[trajectories]", text, required=True)),
                jump_tol=float(_expect(raw_traj, "jump_tol", (int, float), "[trajectories]", text, default=1e-10)),
            )
        except ValueError as exc:
            raise ConfigError(f"invalid [trajectories]: {exc}", line=_find_line(text, "trajectories")) from exc

    outputs = _expect(data, "outputs", list, "the top level", text, default=["fidelity"])
    if not all(isinstance(item, str) for item in outputs):
        raise ConfigError("outputs must be a list of strings", line=_find_line(text, "outputs"))

    initial_state = _expect(data, "initial_state", str, "the top level", text, default="psi0")
    output_dir = _expect(data, "output_dir", str, "the top level", text, default=None)

    config = ExperimentConfig(
        scheme=scheme,
        params=params,
        initial_state=initial_state,
        propagation=propagation,
        trajectories=trajectories,
        outputs=tuple(outputs),
        output_dir=output_dir,
        source=str(path),
    )
    # fail early on unparsable state/observable names
    model = build_model(config)
    psi = build_initial_state(config, model)
    build_observables(config, model, psi)
    return config


def build_model(config: ExperimentConfig) -> LindbladModel:
    try:
        return SCHEMES[config.scheme](config.params)
    except ValueError as exc:
        raise ConfigError(f"cannot build scheme {config.scheme!r}: {exc}") from exc


_SINGLE_FLIP = re.compile(r"^single-flip\((\d+)\)$")
_PATTERN = re.compile(r"^pattern\(([01]+)\)$")
_SUPERPOSITION = re.compile(r"^superposition\(([01]+),\s*([01]+),\s*([^,]+),\s*([^,)]+)\)$")


def build_initial_state(config: ExperimentConfig, model: LindbladModel) -> PureState:
    """Resolve the initial-state preset to a pure state on the model space.

    Qubit presets fill the qubit register; any cavity factors start in |0>.
    """
    space = model.space
    qubit_labels = space.qubit_labels()
    n = len(qubit_labels)
    spec = config.initial_state.strip()

    amp_q = np.zeros(2**n, dtype=complex)
    if spec == "psi0":
        amp_q[0] = 1 / np.sqrt(2)
        amp_q[-1] = -1 / np.sqrt(2)
    elif spec == "codeword0":
        amp_q[0] = 1.0
    elif m := _SINGLE_FLIP.match(spec):
        i = int(m.group(1))
        if not 1 <= i <= n:
            raise ConfigError(f"single-flip index {i} out of range 1..{n}")
        amp_q[1 << (n - i)] = 1.0
    elif m := _PATTERN.match(spec):
        bits = m.group(1)
        if len(bits) != n:
            raise ConfigError(f"pattern length {len(bits)} != number of qubits {n}")
        amp_q[int(bits, 2)] = 1.0
    elif m := _SUPERPOSITION.match(spec):
        bits_a, bits_b, c0, c1 = m.groups()
        if len(bits_a) != n or len(bits_b) != n:
            raise ConfigError(f"superposition patterns must have {n} bits")
        try:
            z0, z1 = complex(c0), complex(c1)
        except ValueError as exc:
            raise ConfigError(f"cannot parse superposition amplitudes: {exc}") from exc
        amp_q[int(bits_a, 2)] += z0
        amp_q[int(bits_b, 2)] += z1
        norm = np.linalg.norm(amp_q)
        if norm == 0:
            raise ConfigError("superposition amplitudes cancel to zero")
        amp_q /= norm
    else:
        raise ConfigError(f"unknown initial_state {spec!r}")

    d_cav = space.total_dim // 2**n
    if d_cav == 1:
        full = amp_q
    else:
        vac = np.zeros(d_cav, dtype=complex)
        vac[0] = 1.0
        full = np.kron(amp_q, vac)  # qubits are the leading factors
    return PureState(space, full)


_POPULATION = re.compile(r"^population:([01]+)$")
_PHOTONS = re.compile(r"^photons:(\w+)$")


def build_observables(
    config: ExperimentConfig, model: LindbladModel, psi0: PureState
) -> list[Observable]:
    space = model.space
    qubit_labels = space.qubit_labels()
    n = len(qubit_labels)
    d = space.total_dim
    rho0 = psi0.density_matrix()

    def qubit_operator_entries(entry_row: int, entry_col: int) -> Operator:
        """Operator |row><col| on the qubit register, identity on cavities."""
        d_cav = d // 2**n
        mat = sp.coo_array(
            (
                np.ones(d_cav, dtype=complex),
                (
                    entry_row * d_cav + np.arange(d_cav),
                    entry_col * d_cav + np.arange(d_cav),
                ),
            ),
            shape=(d, d),
        )
        return Operator(space, mat.tocsr())

    out = []
    for name in config.outputs:
        if name == "fidelity":
            out.append(Observable("fidelity", rho0))
        elif name == "codespace_distance":
            proj = qubit_operator_entries(0, 0) + qubit_operator_entries(2**n - 1, 2**n - 1)
            out.append(Observable("codespace_distance", proj, scale=-1.0, offset=1.0))
        elif name == "logical_coherence":
            flip = qubit_operator_entries(2**n - 1, 0)
            out.append(Observable("logical_coherence", flip, reduce="abs"))
        elif m := _POPULATION.match(name):
            bits = m.group(1)
            if len(bits) != n:
                raise ConfigError(f"population pattern needs {n} bits: {name!r}")
            idx = int(bits, 2)
            out.append(Observable(name, qubit_operator_entries(idx, idx)))
        elif m := _PHOTONS.match(name):
            label = m.group(1)
            try:
                pos = space.index_of(label)
            except KeyError as exc:
                raise ConfigError(f"no factor {label!r} for observable {name!r}") from exc
            from .hilbert import annihilator, embed

            a = annihilator(space.factors[pos].dim)
            num = embed(a.conj().T @ a, label, space)
            out.append(Observable(name, num))
        else:
            raise ConfigError(f"unknown observable {name!r}")
    return out
