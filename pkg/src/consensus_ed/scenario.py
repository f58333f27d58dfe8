"""Scenario definition, YAML (de)serialisation, built-in case and generator.

Document layout::

    dgs:
    - {id: DG1, alpha: 0.0031, beta: 8.71, p_max: 113.23}     # gamma optional
    consumers:
    - {id: L1, omega: 17.17, b: 0.0935, p_max: 91.79, attached_dg: DG1}
    edges: [[DG1, DG2], ...]                                   # optional, ring if empty
    initial_lambda: {seed: 0, lo: 0.0, hi: 20.0}               # or {values: {DG1: 3.0}}
    engine: {k_i: auto, k_p: 0.0, dx: 1.0, tolerance: 0.001, max_iterations: 10000}
"""

from __future__ import annotations

import hashlib
import io
import os
from dataclasses import dataclass, field, fields, replace
from functools import cached_property
from typing import Any, Mapping, Optional, Sequence, Union

import numpy as np
import yaml

from .config import AUTO, EngineConfig
from .graph import CommGraph, ConnectivityError, is_connected
from .market import ConsumerParams, DgParams

DEFAULT_LAMBDA_RANGE = (0.0, 20.0)


class ScenarioError(ValueError):
    """Parse or validation failure; ``where`` names the offending field."""

    def __init__(self, message: str, where: Optional[str] = None, line: Optional[int] = None):
        self.where = where
        self.line = line
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if where:
            prefix += f"{where}: "
        super().__init__(prefix + message)


@dataclass(frozen=True)
class InitialLambda:
    """Explicit per-DG starting prices, or a seeded uniform draw on [lo, hi]."""

    values: Optional[tuple] = None  # ((dg_id, lambda), ...)
    seed: int = 0
    lo: float = DEFAULT_LAMBDA_RANGE[0]
    hi: float = DEFAULT_LAMBDA_RANGE[1]

    def __post_init__(self):
        if self.values is None and not self.lo <= self.hi:
            raise ValueError(f"initial lambda range is empty: [{self.lo}, {self.hi}]")

    def resolve(self, dg_ids: Sequence) -> np.ndarray:
        if self.values is not None:
            given = dict(self.values)
            missing = [d for d in dg_ids if d not in given]
            if missing:
                raise ValueError(f"initial_lambda.values lacks DG(s) {missing}")
            return np.array([float(given[d]) for d in dg_ids])
        rng = np.random.default_rng(self.seed)
        return rng.uniform(self.lo, self.hi, len(dg_ids))


@dataclass(frozen=True)
class Scenario:
    dgs: tuple
    consumers: tuple = ()
    edges: tuple = ()
    initial_lambda: Optional[InitialLambda] = None
    engine: EngineConfig = field(default_factory=EngineConfig)

    def __post_init__(self):
        object.__setattr__(self, "dgs", tuple(self.dgs))
        object.__setattr__(self, "consumers", tuple(self.consumers))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        if not self.dgs:
            raise ScenarioError("a scenario needs at least one DG", "dgs")
        ids = [d.id for d in self.dgs]
        seen = set()
        for i, d in enumerate(ids):
            if d in seen:
                raise ScenarioError(f"duplicate DG id {d!r}", f"dgs[{i}].id")
            seen.add(d)
        cids = set()
        for j, c in enumerate(self.consumers):
            if c.id in cids:
                raise ScenarioError(f"duplicate consumer id {c.id!r}", f"consumers[{j}].id")
            cids.add(c.id)
            if c.attached_dg not in seen:
                raise ScenarioError(
                    f"consumer {c.id!r} is attached to unknown DG {c.attached_dg!r}",
                    f"consumers[{j}].attached_dg",
                )
        try:
            g = self.graph()
        except ValueError as exc:
            raise ScenarioError(str(exc), "edges") from None
        if not is_connected(g):
            raise ScenarioError("DG communication graph is not connected", "edges")
        if self.initial_lambda is not None and self.initial_lambda.values is not None:
            extra = set(dict(self.initial_lambda.values)) - seen
            if extra:
                raise ScenarioError(f"unknown DG id(s) {sorted(map(str, extra))}", "initial_lambda.values")
            try:
                self.initial_lambda.resolve(ids)
            except ValueError as exc:
                raise ScenarioError(str(exc), "initial_lambda") from None

    # -- derived views -----------------------------------------------------

    @property
    def n_dg(self) -> int:
        return len(self.dgs)

    @property
    def n_consumer(self) -> int:
        return len(self.consumers)

    @property
    def dg_ids(self) -> list:
        return [d.id for d in self.dgs]

    def graph(self) -> CommGraph:
        if self.edges:
            return CommGraph(self.dg_ids, self.edges)
        return CommGraph.ring(self.dg_ids)

    @cached_property
    def attachment(self) -> np.ndarray:
        """Index of the DG each consumer reports to."""
        pos = {d: i for i, d in enumerate(self.dg_ids)}
        return np.array([pos[c.attached_dg] for c in self.consumers], dtype=np.intp)

    @cached_property
    def attached(self) -> list:
        """Consumer indices attached to each DG, ascending."""
        out = [[] for _ in self.dgs]
        for j, i in enumerate(self.attachment):
            out[i].append(j)
        return out

    @cached_property
    def arrays(self) -> dict:
        """Coefficient columns as read-only float arrays."""
        cols = {
            "alpha": [d.alpha for d in self.dgs],
            "beta": [d.beta for d in self.dgs],
            "gamma": [d.gamma for d in self.dgs],
            "p_gen_max": [d.p_max for d in self.dgs],
            "omega": [c.omega for c in self.consumers],
            "b": [c.b for c in self.consumers],
            "p_load_max": [c.p_max for c in self.consumers],
        }
        out = {}
        for k, v in cols.items():
            a = np.array(v, dtype=float)
            a.setflags(write=False)
            out[k] = a
        return out

    def initial_lambdas(self, seed: Optional[int] = None) -> np.ndarray:
        spec = self.initial_lambda or InitialLambda()
        if seed is not None and spec.values is None:
            spec = replace(spec, seed=seed)
        return spec.resolve(self.dg_ids)


# -- document parsing -------------------------------------------------------

_DG_KEYS = {"id", "alpha", "beta", "gamma", "p_max"}
_CONSUMER_KEYS = {"id", "omega", "b", "p_max", "attached_dg"}
_TOP_KEYS = {"dgs", "consumers", "edges", "initial_lambda", "engine"}
_ENGINE_KEYS = ("k_i", "k_p", "dx", "tolerance", "max_iterations")


def _num(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"expected a number, got {v!r}", where)
    return float(v)


def _ident(v, where):
    if isinstance(v, bool) or not isinstance(v, (str, int)):
        raise ScenarioError(f"expected a string or integer id, got {v!r}", where)
    return v


def _mapping(v, where, allowed, required=()):
    if not isinstance(v, Mapping):
        raise ScenarioError(f"expected a mapping, got {type(v).__name__}", where)
    unknown = set(v) - set(allowed)
    if unknown:
        raise ScenarioError(f"unknown field(s) {sorted(map(str, unknown))}", where)
    for k in required:
        if k not in v:
            raise ScenarioError(f"missing required field {k!r}", where)
    return v


def _list(v, where):
    if v is None:
        return []
    if not isinstance(v, list):
        raise ScenarioError(f"expected a list, got {type(v).__name__}", where)
    return v


def scenario_from_dict(doc: Any) -> Scenario:
    doc = _mapping(doc, "<root>", _TOP_KEYS, required=("dgs",))
    dgs = []
    for i, d in enumerate(_list(doc["dgs"], "dgs")):
        w = f"dgs[{i}]"
        _mapping(d, w, _DG_KEYS, required=("id", "alpha", "beta", "p_max"))
        try:
            dgs.append(DgParams(
                id=_ident(d["id"], f"{w}.id"),
                alpha=_num(d["alpha"], f"{w}.alpha"),
                beta=_num(d["beta"], f"{w}.beta"),
                p_max=_num(d["p_max"], f"{w}.p_max"),
                gamma=_num(d.get("gamma", 0.0), f"{w}.gamma"),
            ))
        except ScenarioError:
            raise
        except ValueError as exc:
            raise ScenarioError(str(exc), w) from None
    consumers = []
    for j, c in enumerate(_list(doc.get("consumers"), "consumers")):
        w = f"consumers[{j}]"
        _mapping(c, w, _CONSUMER_KEYS, required=("id", "omega", "b", "attached_dg"))
        try:
            consumers.append(ConsumerParams(
                id=_ident(c["id"], f"{w}.id"),
                omega=_num(c["omega"], f"{w}.omega"),
                b=_num(c["b"], f"{w}.b"),
                p_max=_num(c["p_max"], f"{w}.p_max") if c.get("p_max") is not None else None,
                attached_dg=_ident(c["attached_dg"], f"{w}.attached_dg"),
            ))
        except ScenarioError:
            raise
        except ValueError as exc:
            raise ScenarioError(str(exc), w) from None
    edges = []
    for k, e in enumerate(_list(doc.get("edges"), "edges")):
        if not isinstance(e, list) or len(e) != 2:
            raise ScenarioError("an edge is a pair [dg_id, dg_id]", f"edges[{k}]")
        edges.append((_ident(e[0], f"edges[{k}][0]"), _ident(e[1], f"edges[{k}][1]")))

    init = None
    if doc.get("initial_lambda") is not None:
        il = doc["initial_lambda"]
        if isinstance(il, Mapping) and "values" in il:
            _mapping(il, "initial_lambda", {"values"})
            vals = il["values"]
            if not isinstance(vals, Mapping):
                raise ScenarioError("expected a mapping dg_id -> lambda", "initial_lambda.values")
            init = InitialLambda(values=tuple(
                (_ident(k, "initial_lambda.values"), _num(v, f"initial_lambda.values.{k}"))
                for k, v in vals.items()
            ))
        else:
            _mapping(il, "initial_lambda", {"seed", "lo", "hi"}, required=("seed", "lo", "hi"))
            seed = il["seed"]
            if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
                raise ScenarioError(f"seed must be a non-negative integer, got {seed!r}",
                                    "initial_lambda.seed")
            try:
                init = InitialLambda(seed=seed, lo=_num(il["lo"], "initial_lambda.lo"),
                                     hi=_num(il["hi"], "initial_lambda.hi"))
            except ScenarioError:
                raise
            except ValueError as exc:
                raise ScenarioError(str(exc), "initial_lambda") from None

    engine = EngineConfig()
    if doc.get("engine") is not None:
        e = _mapping(doc["engine"], "engine", _ENGINE_KEYS)
        kw = {}
        if "k_i" in e:
            kw["k_i"] = AUTO if e["k_i"] == AUTO else _num(e["k_i"], "engine.k_i")
        for k in ("k_p", "dx", "tolerance"):
            if k in e:
                kw[k] = _num(e[k], f"engine.{k}")
        if "max_iterations" in e:
            mi = e["max_iterations"]
            if isinstance(mi, bool) or not isinstance(mi, int):
                raise ScenarioError(f"expected an integer, got {mi!r}", "engine.max_iterations")
            kw["max_iterations"] = mi
        try:
            engine = EngineConfig(**kw)
        except ValueError as exc:
            raise ScenarioError(str(exc), "engine") from None

    return Scenario(dgs=dgs, consumers=consumers, edges=edges, initial_lambda=init, engine=engine)


def loads_scenario(text: str) -> Scenario:
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark is not None else None
        raise ScenarioError(f"parse error: {exc.problem or exc}", line=line) from None
    except yaml.YAMLError as exc:
        raise ScenarioError(f"parse error: {exc}") from None
    if doc is None:
        raise ScenarioError("empty document")
    return scenario_from_dict(doc)


def load_scenario(source: Union[str, os.PathLike, io.TextIOBase]) -> Scenario:
    """Load and validate a scenario from a path or an open text stream."""
    if hasattr(source, "read"):
        return loads_scenario(source.read())
    with open(source, encoding="utf-8") as fh:
        return loads_scenario(fh.read())


def scenario_to_dict(s: Scenario) -> dict:
    dgs = []
    for d in s.dgs:
        row = {"id": d.id, "alpha": d.alpha, "beta": d.beta}
        if d.gamma != 0.0:
            row["gamma"] = d.gamma
        row["p_max"] = d.p_max
        dgs.append(row)
    consumers = [
        {"id": c.id, "omega": c.omega, "b": c.b, "p_max": c.p_max, "attached_dg": c.attached_dg}
        for c in s.consumers
    ]
    doc = {"dgs": dgs, "consumers": consumers}
    if s.edges:
        doc["edges"] = [list(e) for e in s.edges]
    if s.initial_lambda is not None:
        il = s.initial_lambda
        if il.values is not None:
            doc["initial_lambda"] = {"values": {k: v for k, v in il.values}}
        else:
            doc["initial_lambda"] = {"seed": il.seed, "lo": il.lo, "hi": il.hi}
    eng = s.engine
    doc["engine"] = {k: getattr(eng, k) for k in _ENGINE_KEYS}
    return doc


def dumps_scenario(s: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(s), sort_keys=False, default_flow_style=None, width=120)


def save_scenario(s: Scenario, path: Union[str, os.PathLike]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_scenario(s))


def scenario_digest(s: Scenario) -> str:
    return hashlib.sha256(dumps_scenario(s).encode("utf-8")).hexdigest()


# -- built-in case and generator --------------------------------------------

# alpha, beta, p_max (DG) | omega, b, p_max (consumer); rows 11-19 consumers only
_CASE1 = (
    (0.0031, 8.71, 113.23, 17.17, 0.0935, 91.79),
    (0.0074, 3.53, 179.1, 12.28, 0.0417, 147.29),
    (0.0066, 7.58, 90.03, 18.42, 0.1007, 91.41),
    (0.0063, 2.24, 106.41, 7.06, 0.0561, 62.96),
    (0.0069, 8.53, 193.80, 10.85, 0.0540, 100.53),
    (0.0014, 2.25, 37.19, 18.91, 0.1414, 66.88),
    (0.0041, 6.29, 195.4, 18.76, 0.0793, 118.35),
    (0.0051, 4.30, 62.17, 15.70, 0.1064, 73.81),
    (0.0032, 8.26, 143.41, 14.28, 0.0850, 84.00),
    (0.0025, 5.3, 125.0, 10.15, 0.0460, 110.32),
    (None, None, None, 19.04, 0.0650, 146.46),
    (None, None, None, 6.87, 0.0549, 62.61),
    (None, None, None, 15.96, 0.0619, 128.91),
    (None, None, None, 14.70, 0.0633, 116.08),
    (None, None, None, 17.50, 0.0607, 144.04),
    (None, None, None, 10.97, 0.2272, 24.15),
    (None, None, None, 16.25, 0.1224, 66.39),
    (None, None, None, 17.53, 0.0826, 106.14),
    (None, None, None, 9.84, 0.0869, 56.60),
)


def builtin_case1() -> Scenario:
    """The 29-agent accuracy case: 10 DGs and 19 consumers on a DG ring.

    Consumer k attaches to DG ((k - 1) mod 10) + 1, so L1..L10 sit on
    DG1..DG10 and L11..L19 on DG1..DG9.
    """
    dgs = [
        DgParams(id=f"DG{i + 1}", alpha=r[0], beta=r[1], p_max=r[2])
        for i, r in enumerate(_CASE1) if r[0] is not None
    ]
    consumers = [
        ConsumerParams(id=f"L{k + 1}", omega=r[3], b=r[4], p_max=r[5],
                       attached_dg=f"DG{k % len(dgs) + 1}")
        for k, r in enumerate(_CASE1)
    ]
    return Scenario(dgs=dgs, consumers=consumers)


BUILTIN = {"case1": builtin_case1}

# parameter ranges spanned by the built-in case
GEN_RANGES = {
    "alpha": (0.0014, 0.0074),
    "beta": (2.24, 8.71),
    "p_gen_max": (37.0, 196.0),
    "omega": (6.87, 19.04),
    "b": (0.0417, 0.2272),
}


def generate_random(n_dg: int, n_consumer: int, seed: int) -> Scenario:
    """Deterministic random scenario on a DG ring, consumers attached round-robin."""
    if isinstance(n_dg, bool) or int(n_dg) != n_dg or n_dg < 1:
        raise ValueError(f"n_dg must be an integer >= 1, got {n_dg}")
    if isinstance(n_consumer, bool) or int(n_consumer) != n_consumer or n_consumer < 0:
        raise ValueError(f"n_consumer must be an integer >= 0, got {n_consumer}")
    rng = np.random.default_rng(seed)
    r = GEN_RANGES
    alpha = rng.uniform(*r["alpha"], n_dg)
    beta = rng.uniform(*r["beta"], n_dg)
    p_max = rng.uniform(*r["p_gen_max"], n_dg)
    omega = rng.uniform(*r["omega"], n_consumer)
    b = rng.uniform(*r["b"], n_consumer)
    dgs = [
        DgParams(id=f"DG{i + 1}", alpha=float(alpha[i]), beta=float(beta[i]), p_max=float(p_max[i]))
        for i in range(n_dg)
    ]
    consumers = [
        ConsumerParams(id=f"L{j + 1}", omega=float(omega[j]), b=float(b[j]),
                       attached_dg=f"DG{j % n_dg + 1}")
        for j in range(n_consumer)
    ]
    return Scenario(dgs=dgs, consumers=consumers,
                    initial_lambda=InitialLambda(seed=int(seed), lo=0.0, hi=20.0))


def resolve_scenario(ref: str) -> Scenario:
    """Load a built-in scenario by name, else a document from disk."""
    if ref in BUILTIN:
        return BUILTIN[ref]()
    return load_scenario(ref)
