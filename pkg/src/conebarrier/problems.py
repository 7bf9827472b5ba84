"""Problem abstraction, builtin nonconvex test instances, and JSON I/O.

A :class:`ConicProblem` bundles objective callbacks (value, gradient, and a
dense Hessian or a Hessian-vector product), dense equality constraints, a
cone, and a strictly feasible starting point.  Callbacks must be pure; a
problem is immutable after construction.

Problem files are JSON.  Builtin instances serialize as a reference
``{"builtin": <name>, "n": ..., "params": {...}}`` and regenerate bit for
bit on load; explicit instances carry a dense quadratic objective:

    {
      "name": str,
      "n": int,
      "cone": [{"type": "orthant"|"soc", "dim": int}, ...],
      "A": [[...], ...],          # optional, row-major
      "b": [...],                 # required iff A present
      "objective": {"quadratic": {"Q": [[...], ...], "c": [...]}},
      "x0": [...]
    }
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import cones
from .cones import Cone
from .errors import ParseError, SchemaError, UnknownProblem
from .linops import AffineData, empty_affine

BUILTIN_NAMES = (
    "pnorm_simplex",
    "negnorm_simplex",
    "nonconvex_qp_simplex",
    "regularized_loss",
    "soc_quadratic",
)


@dataclass
class ConicProblem:
    name: str
    cone: Cone
    affine: AffineData
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray] | None = None
    hess_vec_fn: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    x0: np.ndarray | None = None
    serial: dict | None = field(default=None, repr=False)  # JSON form for save/load round trips

    def __post_init__(self) -> None:
        if self.hessian is None and self.hess_vec_fn is None:
            raise ValueError("problem needs a dense Hessian or a Hessian-vector callback")
        if self.affine.n != self.cone.total_dim:
            raise ValueError("affine data and cone disagree on dimension")

    @property
    def n(self) -> int:
        return self.cone.total_dim

    @property
    def m(self) -> int:
        return self.affine.m

    @property
    def has_dense_hessian(self) -> bool:
        return self.hessian is not None

    def hess_vec(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        if self.hess_vec_fn is not None:
            return self.hess_vec_fn(x, v)
        return self.hessian(x) @ v


def _simplex_affine(n: int) -> AffineData:
    return AffineData(A=np.ones((1, n)), b=np.array([1.0]))


def _symmetric_indefinite(n: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((n, n))
    return (g + g.T) / (2.0 * np.sqrt(n))


def builtin(name: str, n: int, **params) -> ConicProblem:
    """Construct a builtin instance; each ships its own interior x0."""
    if n < 1:
        raise ValueError("n must be positive")
    if name == "pnorm_simplex":
        p = float(params.pop("p", 0.5))
        _reject_extra(name, params)
        if not 0.0 < p < 1.0:
            raise ValueError("p must lie in (0, 1)")

        def value(x: np.ndarray) -> float:
            return float(np.sum(x**p))

        def gradient(x: np.ndarray) -> np.ndarray:
            return p * x ** (p - 1.0)

        def hessian(x: np.ndarray) -> np.ndarray:
            return np.diag(p * (p - 1.0) * x ** (p - 2.0))

        return ConicProblem(
            name=name,
            cone=cones.orthant(n),
            affine=_simplex_affine(n),
            value=value,
            gradient=gradient,
            hessian=hessian,
            x0=np.full(n, 1.0 / n),
            serial={"builtin": name, "n": n, "params": {"p": p}},
        )

    if name == "negnorm_simplex":
        _reject_extra(name, params)

        return ConicProblem(
            name=name,
            cone=cones.orthant(n),
            affine=_simplex_affine(n),
            value=lambda x: -0.5 * float(x @ x),
            gradient=lambda x: -x,
            hessian=lambda x: -np.eye(n),
            x0=np.full(n, 1.0 / n),
            serial={"builtin": name, "n": n, "params": {}},
        )

    if name == "nonconvex_qp_simplex":
        seed = int(params.pop("seed", 0))
        _reject_extra(name, params)
        rng = np.random.default_rng(seed)
        q_mat = _symmetric_indefinite(n, rng)
        c = rng.standard_normal(n)
        return _quadratic_problem(
            name,
            q_mat,
            c,
            cone=cones.orthant(n),
            affine=_simplex_affine(n),
            x0=np.full(n, 1.0 / n),
            serial={"builtin": name, "n": n, "params": {"seed": seed}},
        )

    if name == "regularized_loss":
        p = float(params.pop("p", 0.5))
        seed = int(params.pop("seed", 0))
        _reject_extra(name, params)
        if not 0.0 < p < 1.0:
            raise ValueError("p must lie in (0, 1)")
        rng = np.random.default_rng(seed)
        c_mat = rng.standard_normal((n, n)) / np.sqrt(n)
        d = rng.standard_normal(n)

        def value(x: np.ndarray) -> float:
            res = c_mat @ x - d
            return float(res @ res) + float(np.sum(x**p))

        def gradient(x: np.ndarray) -> np.ndarray:
            return 2.0 * c_mat.T @ (c_mat @ x - d) + p * x ** (p - 1.0)

        def hessian(x: np.ndarray) -> np.ndarray:
            return 2.0 * c_mat.T @ c_mat + np.diag(p * (p - 1.0) * x ** (p - 2.0))

        return ConicProblem(
            name=name,
            cone=cones.orthant(n),
            affine=empty_affine(n),
            value=value,
            gradient=gradient,
            hessian=hessian,
            x0=np.ones(n),
            serial={"builtin": name, "n": n, "params": {"p": p, "seed": seed}},
        )

    if name == "soc_quadratic":
        if n < 2:
            raise ValueError("soc_quadratic needs n >= 2")
        m = int(params.pop("m", 2))
        seed = int(params.pop("seed", 0))
        _reject_extra(name, params)
        if not 1 <= m <= n - 1:
            raise ValueError("need 1 <= m <= n - 1")
        rng = np.random.default_rng(seed)
        q_mat = _symmetric_indefinite(n, rng)
        c = rng.standard_normal(n)
        # interior anchor (2, w) with ||w|| = 1; the first constraint row pins
        # the cone's radial coordinate, keeping the feasible slice compact
        w = rng.standard_normal(n - 1)
        w /= np.linalg.norm(w)
        x0 = np.concatenate(([2.0], w))
        a_mat = np.zeros((m, n))
        a_mat[0, 0] = 1.0
        if m > 1:
            a_mat[1:] = rng.standard_normal((m - 1, n))
        b = a_mat @ x0
        return _quadratic_problem(
            name,
            q_mat,
            c,
            cone=cones.second_order(n),
            affine=AffineData(A=a_mat, b=b),
            x0=x0,
            serial={"builtin": name, "n": n, "params": {"m": m, "seed": seed}},
        )

    raise UnknownProblem(f"no builtin problem named {name!r}")


def _reject_extra(name: str, params: dict) -> None:
    if params:
        raise UnknownProblem(f"unknown parameters for builtin {name!r}: {sorted(params)}")


def _quadratic_problem(
    name: str,
    q_mat: np.ndarray,
    c: np.ndarray,
    cone: Cone,
    affine: AffineData,
    x0: np.ndarray,
    serial: dict | None,
) -> ConicProblem:
    return ConicProblem(
        name=name,
        cone=cone,
        affine=affine,
        value=lambda x: 0.5 * float(x @ q_mat @ x) + float(c @ x),
        gradient=lambda x: q_mat @ x + c,
        hessian=lambda x: q_mat,
        x0=np.asarray(x0, dtype=float),
        serial=serial,
    )


def perturb(problem: ConicProblem, sigma: float) -> ConicProblem:
    """Add sigma * ||x||^2 to the objective (gradient +2 sigma x, Hessian +2 sigma I)."""
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    n = problem.n
    base_value, base_grad = problem.value, problem.gradient
    hessian = None
    if problem.hessian is not None:
        base_hess = problem.hessian
        hessian = lambda x: base_hess(x) + 2.0 * sigma * np.eye(n)
    hess_vec_fn = None
    if problem.hess_vec_fn is not None:
        base_hv = problem.hess_vec_fn
        hess_vec_fn = lambda x, v: base_hv(x, v) + 2.0 * sigma * v
    return ConicProblem(
        name=f"{problem.name}+reg",
        cone=problem.cone,
        affine=problem.affine,
        value=lambda x: base_value(x) + sigma * float(x @ x),
        gradient=lambda x: base_grad(x) + 2.0 * sigma * x,
        hessian=hessian,
        hess_vec_fn=hess_vec_fn,
        x0=problem.x0,
        serial=None,
    )


def finite_diff_check(problem: ConicProblem, x: np.ndarray, h: float = 1e-6) -> dict[str, float]:
    """Central-difference consistency report for the gradient and Hessian.

    Errors are relative to the scale of the analytic quantity (floored at 1).
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    grad = problem.gradient(x)
    scale_g = max(1.0, float(np.max(np.abs(grad))))
    max_grad_err = 0.0
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        fd = (problem.value(x + e) - problem.value(x - e)) / (2.0 * h)
        max_grad_err = max(max_grad_err, abs(fd - grad[i]) / scale_g)

    hess_cols = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        hess_cols[:, i] = problem.hess_vec(x, e)
    scale_h = max(1.0, float(np.max(np.abs(hess_cols))))
    max_hess_err = 0.0
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        fd_col = (problem.gradient(x + e) - problem.gradient(x - e)) / (2.0 * h)
        max_hess_err = max(max_hess_err, float(np.max(np.abs(fd_col - hess_cols[:, i]))) / scale_h)
    return {"max_grad_err": max_grad_err, "max_hess_err": max_hess_err}


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise SchemaError(msg)


def problem_from_dict(data: dict) -> ConicProblem:
    if not isinstance(data, dict):
        raise SchemaError("problem file must contain a JSON object")
    if "builtin" in data:
        _require("n" in data, "builtin reference needs field 'n'")
        params = data.get("params", {})
        _require(isinstance(params, dict), "'params' must be an object")
        name = data["builtin"]
        if name not in BUILTIN_NAMES:
            raise UnknownProblem(f"no builtin problem named {name!r}")
        try:
            return builtin(name, int(data["n"]), **params)
        except (ValueError, TypeError) as exc:
            raise SchemaError(f"bad builtin parameters: {exc}") from exc

    for key in ("n", "cone", "objective", "x0"):
        _require(key in data, f"missing field '{key}'")
    n = int(data["n"])
    _require(isinstance(data["cone"], list) and data["cone"], "'cone' must be a nonempty list")
    for entry in data["cone"]:
        _require(isinstance(entry, dict) and "type" in entry and "dim" in entry,
                 "cone blocks need 'type' and 'dim'")
    try:
        cone = cones.cone_from_description(data["cone"])
    except (ValueError, KeyError) as exc:
        raise SchemaError(f"bad cone description: {exc}") from exc
    _require(cone.total_dim == n, "cone dimensions do not sum to n")

    if "A" in data:
        _require("b" in data, "'A' present without 'b'")
        a_mat = np.asarray(data["A"], dtype=float)
        b = np.asarray(data["b"], dtype=float)
        _require(a_mat.ndim == 2 and a_mat.shape[1] == n, "'A' must be m x n")
        try:
            affine = AffineData(A=a_mat, b=b)
        except ValueError as exc:
            raise SchemaError(str(exc)) from exc
    else:
        _require("b" not in data, "'b' present without 'A'")
        affine = empty_affine(n)

    obj = data["objective"]
    _require(isinstance(obj, dict) and "quadratic" in obj,
             "explicit objectives must be {'quadratic': {'Q': ..., 'c': ...}}")
    quad = obj["quadratic"]
    _require(isinstance(quad, dict) and "Q" in quad and "c" in quad,
             "'quadratic' needs fields 'Q' and 'c'")
    q_mat = np.asarray(quad["Q"], dtype=float)
    c = np.asarray(quad["c"], dtype=float)
    _require(q_mat.shape == (n, n), "'Q' must be n x n")
    _require(c.shape == (n,), "'c' must have length n")
    q_mat = 0.5 * (q_mat + q_mat.T)
    x0 = np.asarray(data["x0"], dtype=float)
    _require(x0.shape == (n,), "'x0' must have length n")

    serial = {
        "name": data.get("name", "quadratic"),
        "n": n,
        "cone": cone.describe(),
        "objective": {"quadratic": {"Q": q_mat.tolist(), "c": c.tolist()}},
        "x0": x0.tolist(),
    }
    if affine.m > 0:
        serial["A"] = affine.A.tolist()
        serial["b"] = affine.b.tolist()
    return _quadratic_problem(
        data.get("name", "quadratic"), q_mat, c, cone, affine, x0, serial
    )


def load_problem(path: str | Path) -> ConicProblem:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return problem_from_dict(data)


def save_problem(problem: ConicProblem, path: str | Path) -> None:
    if problem.serial is None:
        raise SchemaError(
            f"problem {problem.name!r} has no serializable form "
            "(callback-defined objective)"
        )
    Path(path).write_text(json.dumps(problem.serial, indent=2) + "\n")
