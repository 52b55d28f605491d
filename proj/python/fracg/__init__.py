"""Python bindings for the fracg nonlocal Orlicz toolkit."""

import json as _json

from ._fracg import (
    ConfigError,
    ConvergenceError,
    DomainError,
    GridFunction,
    NFunction,
    PreconditionError,
    Problem,
    RangeError,
    SolveReport,
    energy,
    gagliardo_modular,
    linear_oracle,
    luxemburg_norm,
    run_config_schema,
    solve,
    tail,
)
from . import _fracg

__all__ = [
    "ConfigError", "ConvergenceError", "DomainError", "GridFunction", "NFunction",
    "PreconditionError", "Problem", "RangeError", "SolveReport", "build_problem",
    "centered_grid", "de_giorgi", "energy", "gagliardo_modular", "holder_fit",
    "linear_oracle", "luxemburg_norm", "nfunction", "report_dict", "run",
    "run_config_schema", "solve", "sobolev_poincare", "tail",
]


def nfunction(spec):
    """N-function from a dict such as {"family": "power", "p": 3}."""
    return NFunction._from_json(_json.dumps(spec))


def build_problem(spec):
    """Discrete Dirichlet problem from the "problem" block of a run config."""
    return Problem._from_json(_json.dumps(spec))


def centered_grid(dim, h, half, values, exterior=None):
    return _fracg._centered_grid(dim, h, half, list(values), _json.dumps(exterior or {"kind": "zero"}))


def report_dict(obj, history=False):
    if isinstance(obj, SolveReport):
        return _json.loads(obj._to_json(history))
    return _json.loads(obj._to_json())


def de_giorgi(C, B, beta, A0, steps):
    return _json.loads(_fracg._de_giorgi(C, B, beta, A0, steps))


def holder_fit(u, x0, r0, sigma, levels, *, problem=None, s=None, nf=None):
    """Oscillation decay on nested balls. Pass either a problem or (s, nf)."""
    if problem is not None:
        return _json.loads(_fracg._holder_fit_problem(problem, u, list(x0), r0, sigma, levels))
    if s is None or nf is None:
        raise ValueError("holder_fit needs a problem or both s and nf")
    return _json.loads(_fracg._holder_fit(u, list(x0), r0, sigma, levels, s, nf))


def sobolev_poincare(f, center, radius, s, nf, theta):
    return _json.loads(_fracg._sobolev_poincare(f, list(center), radius, s, nf, theta))


def run(config, mode="all", out=None):
    """Run a config dict. Returns (exit_code, output_dir, written_files, messages)."""
    return _fracg._run_config(_json.dumps(config), mode, out)
