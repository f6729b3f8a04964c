"""Run configuration: a flat ``key = value`` text format with dotted keys.

Grammar::

    # comment
    section.key = value

Recognized keys and defaults are listed in ``DEFAULTS``.  Unknown keys and
malformed values raise :class:`ConfigError` naming the key, before any
computation starts.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mesh import Mesh, MeshError, load_mesh, structured_unit_square
from .model import ConfigError, ModelParams
from .potentials import PotentialSplit, parse_potential
from .stepper import NewtonConfig

DEFAULTS = {
    "mesh.file": None,
    "mesh.n": "16",
    "model.m": "1",
    "model.m_gamma": "1",
    "model.sigma": "1",
    "model.delta": "1",
    "model.delta_gamma": "1",
    "model.kappa": "1",
    "model.bc_mode": "CH",
    "time.tau": "1e-3",
    "time.n_steps": "10",
    "potential.bulk": "doublewell(0)",
    "potential.surface": "doublewell(0)",
    "initial.condition": "random(0.1, 0)",
    "initial.seed": "0",
    "newton.abs_tol": "1e-10",
    "newton.rel_tol": "1e-9",
    "newton.max_iters": "50",
    "newton.damping": "0.5",
    "newton.max_backtracks": "30",
    "krylov.tol": "1e-8",
    "krylov.restart": "50",
    "krylov.maxit": "20",
    "krylov.preconditioner": "woodbury",
    "solver.schur": "auto",
    "solver.cg_tol": "1e-10",
    "solver.cg_maxit": "0",
    "output.dir": "output",
    "output.every": "0",
    "output.dump_matrices": "false",
}


@dataclass(frozen=True)
class RunConfig:
    mesh: Mesh
    params: ModelParams
    bulk: PotentialSplit
    surface: PotentialSplit
    newton: NewtonConfig
    n_steps: int
    initial: str
    seed: int
    schur_method: str
    cg_tol: float
    cg_maxit: int | None
    output_dir: Path
    output_every: int
    dump_matrices: bool
    mesh_n: int | None = None


def parse_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(key, "unknown key")
        if key in values:
            raise ConfigError(key, "given twice")
        values[key] = value
    return values


def _number(values, key, kind=float):
    raw = values[key]
    try:
        return kind(raw)
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected {kind.__name__}, got {raw!r}") from None


def _bool(values, key):
    raw = str(values[key]).lower()
    if raw in ("1", "true", "yes", "on"):
        return True
    if raw in ("0", "false", "no", "off"):
        return False
    raise ConfigError(key, f"expected boolean, got {values[key]!r}")


def build_config(values: dict, base_dir: Path = Path(".")) -> RunConfig:
    v = dict(DEFAULTS)
    v.update(values)

    mesh_n = None
    if v["mesh.file"]:
        path = Path(v["mesh.file"])
        if not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ConfigError("mesh.file", f"no such file: {path}")
        try:
            mesh = load_mesh(path)
        except MeshError as exc:
            raise ConfigError("mesh.file", str(exc)) from None
    else:
        mesh_n = _number(v, "mesh.n", int)
        if mesh_n < 1:
            raise ConfigError("mesh.n", "must be >= 1")
        mesh = structured_unit_square(mesh_n)

    try:
        bulk = parse_potential(v["potential.bulk"])
    except ValueError as exc:
        raise ConfigError("potential.bulk", str(exc)) from None
    try:
        surface = parse_potential(v["potential.surface"])
    except ValueError as exc:
        raise ConfigError("potential.surface", str(exc)) from None

    params = ModelParams(
        m=_number(v, "model.m"),
        m_gamma=_number(v, "model.m_gamma"),
        sigma=_number(v, "model.sigma"),
        delta=_number(v, "model.delta"),
        delta_gamma=_number(v, "model.delta_gamma"),
        kappa=_number(v, "model.kappa"),
        tau=_number(v, "time.tau"),
        bc_mode=v["model.bc_mode"].upper(),
    ).validate(surface)

    try:
        newton = NewtonConfig(
            abs_tol=_number(v, "newton.abs_tol"),
            rel_tol=_number(v, "newton.rel_tol"),
            max_iters=_number(v, "newton.max_iters", int),
            damping=_number(v, "newton.damping"),
            max_backtracks=_number(v, "newton.max_backtracks", int),
            krylov_tol=_number(v, "krylov.tol"),
            krylov_restart=_number(v, "krylov.restart", int),
            krylov_maxit=_number(v, "krylov.maxit", int),
            preconditioner=v["krylov.preconditioner"],
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("newton", str(exc)) from None

    n_steps = _number(v, "time.n_steps", int)
    if n_steps < 1:
        raise ConfigError("time.n_steps", "must be >= 1")
    schur = v["solver.schur"]
    if schur not in ("auto", "cholesky", "cg"):
        raise ConfigError("solver.schur", f"must be auto, cholesky or cg, got {schur!r}")
    cg_tol = _number(v, "solver.cg_tol")
    if cg_tol <= 0:
        raise ConfigError("solver.cg_tol", "must be > 0")
    cg_maxit = _number(v, "solver.cg_maxit", int)
    every = _number(v, "output.every", int)
    if every < 0:
        raise ConfigError("output.every", "must be >= 0")

    initial = v["initial.condition"]
    try:
        parse_initial(initial)
    except ValueError as exc:
        raise ConfigError("initial.condition", str(exc)) from None

    out = Path(v["output.dir"])
    return RunConfig(
        mesh=mesh,
        params=params,
        bulk=bulk,
        surface=surface,
        newton=newton,
        n_steps=n_steps,
        initial=initial,
        seed=_number(v, "initial.seed", int),
        schur_method=schur,
        cg_tol=cg_tol,
        cg_maxit=cg_maxit or None,
        output_dir=out if out.is_absolute() else base_dir / out,
        output_every=every,
        dump_matrices=_bool(v, "output.dump_matrices"),
        mesh_n=mesh_n,
    )


def load_config(path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError("config", f"no such file: {path}")
    values = parse_text(path.read_text())
    for key, value in (overrides or {}).items():
        if key not in DEFAULTS:
            raise ConfigError(key, "unknown key")
        values[key] = value
    return build_config(values, path.parent)


_CALL = re.compile(r"^\s*(\w+)\s*\((.*)\)\s*$")


def parse_initial(spec: str):
    """Split ``name(a, b, ...)`` into the name and its float arguments."""
    match = _CALL.match(spec)
    if not match:
        raise ValueError(f"malformed initial condition {spec!r}")
    name, args = match.group(1), match.group(2).strip()
    try:
        values = [float(a) for a in args.split(",")] if args else []
    except ValueError:
        raise ValueError(f"non-numeric argument in {spec!r}") from None
    arity = {"constant": (1,), "random": (1, 2), "tanh_interface": (4,)}
    if name not in arity:
        raise ValueError(f"unknown initial condition {name!r}")
    if len(values) not in arity[name]:
        raise ValueError(f"{name} takes {' or '.join(map(str, arity[name]))} arguments")
    return name, values


def initial_condition(spec: str, mesh: Mesh, seed: int = 0) -> np.ndarray:
    """Nodal values of the initial phase field.

    ``constant(c)``, ``random(amplitude[, mean])`` (uniform noise in
    ``mean +- amplitude``) or ``tanh_interface(nx, ny, offset, width)`` for
    ``tanh((x . n - offset) / width)`` with ``n`` normalized.
    """
    name, args = parse_initial(spec)
    x = mesh.vertices
    if name == "constant":
        return np.full(mesh.n_vertices, args[0])
    if name == "random":
        amplitude = args[0]
        mean = args[1] if len(args) > 1 else 0.0
        rng = np.random.default_rng(seed)
        # draw in input order so renumbering does not change the field
        noise = rng.uniform(-1.0, 1.0, mesh.n_vertices)
        return mean + amplitude * noise[mesh.original_index]
    nx, ny, offset, width = args
    norm = np.hypot(nx, ny)
    if norm == 0 or width <= 0:
        raise ValueError("tanh_interface needs a nonzero normal and positive width")
    return np.tanh(((x[:, 0] * nx + x[:, 1] * ny) / norm - offset) / width)
