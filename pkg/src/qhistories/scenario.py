"""Scenario files: parse, execute, render.

A scenario is a YAML document declaring a Hilbert-space dimension, named
kets and operators, frameworks, history families, measurement models and
ensembles, plus an ordered command list.  ``run_scenario`` executes the
commands and returns a Report; ``render_report`` serializes it to bytes
that are identical run after run (no clocks, no environment, sums taken
in declared order).

Physics outcomes that are verdicts rather than failures -- a meaningless
conjunction, an inconsistent family, an impossible refinement, a
zero-probability conditioning event, an invalid declared framework --
land in the report with exit status success; everything else raises
ExecutionError.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
import yaml

from ._version import __version__
from .errors import (
    DimensionMismatch,
    ExecutionError,
    IncompatibleError,
    IncompletePDI,
    InconsistentFamily,
    MeaninglessError,
    NotAProjector,
    NotOrthogonal,
    ParseError,
    QHistoriesError,
    UnknownReference,
    ZeroConditioningEvent,
    ZeroVector,
)
from .histories import (
    HistoryFamily,
    InitialCondition,
    ProbabilityTable,
    assign_probabilities,
    build_family,
    conditional_probability,
    consistency_check,
    marginal_distribution,
)
from .info import channel_experiment, dense_coding_demo, make_ensemble
from .linalg import DEFAULT_TOLERANCES, Tolerances
from .measurement import (
    build_measurement_model,
    family_pointer,
    retrodict,
)
from .properties import (
    Projector,
    common_refinement,
    compatible,
    conjunction,
    make_projector,
    validate_pdi,
)

__all__ = [
    "SCHEMA_VERSION",
    "Scenario",
    "Command",
    "Section",
    "Report",
    "parse_scenario",
    "run_scenario",
    "render_report",
]

SCHEMA_VERSION = 1

#: deviation from unit norm beyond which a declared ket draws a warning
_NORM_WARN = 1e-6

COMMAND_KINDS = (
    "validate-pdi",
    "conjunction",
    "refinement",
    "compatibility",
    "consistency",
    "probabilities",
    "marginal",
    "conditional",
    "measure-model",
    "retrodict",
    "channel",
    "dense-coding",
)


# --- parsed declarations ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class _PdiSpec:
    labels: tuple[str, ...]
    sources: tuple[np.ndarray, ...]  # 1-d ket or 2-d matrix per member


@dataclass(frozen=True, eq=False)
class _FamilySpec:
    initial_kind: str  # "pure" | "density"
    initial: np.ndarray
    times: tuple[float, ...]
    dynamics: str  # "identity" | "hamiltonian" | "propagators"
    hamiltonian: np.ndarray | None
    hbar: float
    propagators: tuple[np.ndarray, ...] | None
    slots: tuple[tuple[str, Any], ...]  # ("pdi", name) | ("inline", ((label, src), ...))


@dataclass(frozen=True, eq=False)
class _ModelSpec:
    system_basis: tuple[np.ndarray, ...]
    ready: np.ndarray
    pointers: tuple[np.ndarray, ...]
    post: tuple[np.ndarray, ...] | None


@dataclass(frozen=True, eq=False)
class _EnsembleSpec:
    priors: tuple[float, ...]
    states: tuple[np.ndarray, ...]


@dataclass(frozen=True, eq=False)
class Command:
    kind: str
    args: dict


@dataclass(frozen=True, eq=False)
class Scenario:
    """Fully resolved scenario: declarations plus the ordered command list."""

    dimension: int
    kets: dict[str, np.ndarray]
    operators: dict[str, np.ndarray]
    pdis: dict[str, _PdiSpec]
    families: dict[str, _FamilySpec]
    models: dict[str, _ModelSpec]
    ensembles: dict[str, _EnsembleSpec]
    commands: tuple[Command, ...]


# --- parsing helpers -----------------------------------------------------


def _fail(where: str, message: str) -> ParseError:
    return ParseError(f"{where}: {message}")


def _require_map(value, where: str) -> dict:
    if not isinstance(value, dict):
        raise _fail(where, f"expected a mapping, got {type(value).__name__}")
    return value


def _require_list(value, where: str) -> list:
    if not isinstance(value, list):
        raise _fail(where, f"expected a list, got {type(value).__name__}")
    return value


def _parse_complex(value, where: str) -> complex:
    if isinstance(value, bool):
        raise _fail(where, "booleans are not numbers")
    if isinstance(value, (int, float)):
        return complex(float(value), 0.0)
    if isinstance(value, list) and len(value) == 2 and all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in value
    ):
        return complex(float(value[0]), float(value[1]))
    raise _fail(where, f"expected a number or [re, im] pair, got {value!r}")


def _parse_ket(value, where: str) -> np.ndarray:
    entries = _require_list(value, where)
    if not entries:
        raise _fail(where, "a ket needs at least one entry")
    return np.array(
        [_parse_complex(x, f"{where}[{i}]") for i, x in enumerate(entries)],
        dtype=np.complex128,
    )


def _parse_matrix(value, where: str) -> np.ndarray:
    rows = _require_list(value, where)
    if not rows:
        raise _fail(where, "a matrix needs at least one row")
    parsed = []
    for i, row in enumerate(rows):
        cells = _require_list(row, f"{where} row {i}")
        parsed.append([_parse_complex(x, f"{where}[{i}][{j}]") for j, x in enumerate(cells)])
    n = len(parsed)
    if any(len(r) != n for r in parsed):
        raise _fail(where, "matrix must be square")
    return np.array(parsed, dtype=np.complex128)


def _parse_amplitudes(value, where: str) -> tuple[complex, ...]:
    entries = _require_list(value, where)
    if not entries:
        raise _fail(where, "need at least one amplitude")
    return tuple(_parse_complex(x, f"{where}[{i}]") for i, x in enumerate(entries))


class _Declarations:
    """Named entities seen so far, with lookup helpers."""

    def __init__(self) -> None:
        self.kets: dict[str, np.ndarray] = {}
        self.operators: dict[str, np.ndarray] = {}

    def source(self, name: str, where: str) -> np.ndarray:
        if name in self.kets:
            return self.kets[name]
        if name in self.operators:
            return self.operators[name]
        raise UnknownReference(f"{where}: no ket or operator named {name!r}")

    def ket(self, name: str, where: str) -> np.ndarray:
        if name in self.kets:
            return self.kets[name]
        raise UnknownReference(f"{where}: no ket named {name!r}")


def _member_source(decl: _Declarations, entry, where: str) -> tuple[str | None, np.ndarray]:
    """A framework/slot member: a declared name or an inline matrix."""
    if isinstance(entry, str):
        return entry, decl.source(entry, where)
    if isinstance(entry, list):
        return None, _parse_matrix(entry, where)
    raise _fail(where, f"expected a name or an inline matrix, got {type(entry).__name__}")


def _check_dim(array: np.ndarray, dimension: int, where: str) -> None:
    size = array.shape[0]
    if size != dimension:
        raise DimensionMismatch(
            f"{where}: entity of dimension {size} used where {dimension} is required"
        )


def _parse_member_list(
    decl: _Declarations, spec: dict, dimension: int, where: str
) -> tuple[tuple[str, ...], tuple[np.ndarray, ...]]:
    members = _require_list(spec.get("members"), f"{where}.members")
    if not members:
        raise _fail(f"{where}.members", "needs at least one member")
    raw_labels = spec.get("labels")
    labels: list[str] = []
    sources: list[np.ndarray] = []
    for i, entry in enumerate(members):
        name, source = _member_source(decl, entry, f"{where}.members[{i}]")
        _check_dim(source, dimension, f"{where}.members[{i}]")
        sources.append(source)
        labels.append(name if name is not None else f"m{i}")
    if raw_labels is not None:
        given = _require_list(raw_labels, f"{where}.labels")
        if len(given) != len(members):
            raise _fail(f"{where}.labels", "one label per member required")
        labels = [str(l) for l in given]
    else:
        for i, entry in enumerate(members):
            if not isinstance(entry, str):
                raise _fail(
                    f"{where}.members[{i}]",
                    "inline members need an explicit labels list",
                )
    if len(set(labels)) != len(labels):
        raise _fail(f"{where}.labels", "labels must be unique")
    return tuple(labels), tuple(sources)


def _parse_family(
    decl: _Declarations,
    pdis: dict[str, _PdiSpec],
    spec: dict,
    dimension: int,
    where: str,
) -> _FamilySpec:
    spec = _require_map(spec, where)
    unknown = set(spec) - {"initial", "times", "dynamics", "events"}
    if unknown:
        raise _fail(where, f"unknown keys {sorted(unknown)}")

    raw_initial = spec.get("initial")
    if isinstance(raw_initial, str):
        initial_kind = "pure"
        initial = decl.ket(raw_initial, f"{where}.initial")
    elif isinstance(raw_initial, dict) and set(raw_initial) == {"density"}:
        name = raw_initial["density"]
        if not isinstance(name, str) or name not in decl.operators:
            raise UnknownReference(f"{where}.initial: no operator named {name!r}")
        initial_kind = "density"
        initial = decl.operators[name]
    else:
        raise _fail(f"{where}.initial", "expected a ket name or {density: operator}")
    _check_dim(initial, dimension, f"{where}.initial")

    raw_times = _require_list(spec.get("times"), f"{where}.times")
    try:
        times = tuple(float(t) for t in raw_times)
    except (TypeError, ValueError):
        raise _fail(f"{where}.times", "times must be numbers") from None
    if len(times) < 2 or any(b <= a for a, b in zip(times, times[1:])):
        raise _fail(f"{where}.times", "times must be strictly increasing, two or more")

    raw_dyn = spec.get("dynamics", "identity")
    hamiltonian = None
    hbar = 1.0
    propagators = None
    if raw_dyn == "identity":
        dynamics = "identity"
    elif isinstance(raw_dyn, dict) and "hamiltonian" in raw_dyn:
        extra = set(raw_dyn) - {"hamiltonian", "hbar"}
        if extra:
            raise _fail(f"{where}.dynamics", f"unknown keys {sorted(extra)}")
        name = raw_dyn["hamiltonian"]
        if not isinstance(name, str) or name not in decl.operators:
            raise UnknownReference(f"{where}.dynamics: no operator named {name!r}")
        dynamics = "hamiltonian"
        hamiltonian = decl.operators[name]
        _check_dim(hamiltonian, dimension, f"{where}.dynamics.hamiltonian")
        if "hbar" in raw_dyn:
            hbar = float(raw_dyn["hbar"])
            if not hbar > 0:
                raise _fail(f"{where}.dynamics.hbar", "must be positive")
    elif isinstance(raw_dyn, dict) and set(raw_dyn) == {"propagators"}:
        names = _require_list(raw_dyn["propagators"], f"{where}.dynamics.propagators")
        if len(names) != len(times) - 1:
            raise _fail(
                f"{where}.dynamics.propagators",
                f"need {len(times) - 1} propagators, got {len(names)}",
            )
        mats = []
        for i, name in enumerate(names):
            if not isinstance(name, str) or name not in decl.operators:
                raise UnknownReference(
                    f"{where}.dynamics.propagators[{i}]: no operator named {name!r}"
                )
            mat = decl.operators[name]
            _check_dim(mat, dimension, f"{where}.dynamics.propagators[{i}]")
            mats.append(mat)
        dynamics = "propagators"
        propagators = tuple(mats)
    else:
        raise _fail(
            f"{where}.dynamics",
            "expected 'identity', {hamiltonian: ...} or {propagators: [...]}",
        )

    raw_events = _require_list(spec.get("events"), f"{where}.events")
    if len(raw_events) != len(times) - 1:
        raise _fail(
            f"{where}.events", f"need {len(times) - 1} slots, got {len(raw_events)}"
        )
    slots: list[tuple[str, Any]] = []
    for i, raw_slot in enumerate(raw_events):
        slot_where = f"{where}.events[{i}]"
        slot = _require_map(raw_slot, slot_where)
        if set(slot) == {"pdi"}:
            name = slot["pdi"]
            if not isinstance(name, str) or name not in pdis:
                raise UnknownReference(f"{slot_where}: no framework named {name!r}")
            slots.append(("pdi", name))
        elif "members" in slot:
            extra = set(slot) - {"members", "labels"}
            if extra:
                raise _fail(slot_where, f"unknown keys {sorted(extra)}")
            labels, sources = _parse_member_list(decl, slot, dimension, slot_where)
            slots.append(("inline", tuple(zip(labels, sources))))
        else:
            raise _fail(slot_where, "expected {pdi: name} or {members: [...]}")
    return _FamilySpec(
        initial_kind, initial, times, dynamics, hamiltonian, hbar, propagators,
        tuple(slots),
    )


def _parse_model(
    decl: _Declarations, spec: dict, dimension: int, where: str
) -> _ModelSpec:
    spec = _require_map(spec, where)
    unknown = set(spec) - {"system_basis", "ready", "pointers", "post_states"}
    if unknown:
        raise _fail(where, f"unknown keys {sorted(unknown)}")

    def ket_list(key: str, required: bool = True) -> tuple[np.ndarray, ...] | None:
        if key not in spec:
            if required:
                raise _fail(where, f"missing key {key!r}")
            return None
        names = _require_list(spec[key], f"{where}.{key}")
        return tuple(
            decl.ket(n, f"{where}.{key}[{i}]") if isinstance(n, str)
            else _parse_ket(n, f"{where}.{key}[{i}]")
            for i, n in enumerate(names)
        )

    system = ket_list("system_basis")
    ready_raw = spec.get("ready")
    if isinstance(ready_raw, str):
        ready = decl.ket(ready_raw, f"{where}.ready")
    elif isinstance(ready_raw, list):
        ready = _parse_ket(ready_raw, f"{where}.ready")
    else:
        raise _fail(f"{where}.ready", "expected a ket name or inline ket")
    pointers = ket_list("pointers")
    post = ket_list("post_states", required=False)

    ds = len(system)
    if ds == 0 or any(k.size != ds for k in system):
        raise DimensionMismatch(
            f"{where}.system_basis: need dim-many kets of that same dimension"
        )
    dm = ready.size
    if any(k.size != dm for k in pointers):
        raise DimensionMismatch(f"{where}.pointers: must match the ready ket dimension")
    if ds * dm != dimension:
        raise DimensionMismatch(
            f"{where}: system ({ds}) times apparatus ({dm}) must equal the "
            f"scenario dimension {dimension}"
        )
    return _ModelSpec(system, ready, pointers, post)


def _parse_ensemble(
    decl: _Declarations, spec: dict, dimension: int, where: str
) -> _EnsembleSpec:
    spec = _require_map(spec, where)
    unknown = set(spec) - {"priors", "states"}
    if unknown:
        raise _fail(where, f"unknown keys {sorted(unknown)}")
    raw_priors = _require_list(spec.get("priors"), f"{where}.priors")
    try:
        priors = tuple(float(p) for p in raw_priors)
    except (TypeError, ValueError):
        raise _fail(f"{where}.priors", "priors must be numbers") from None
    raw_states = _require_list(spec.get("states"), f"{where}.states")
    if len(raw_states) != len(priors):
        raise _fail(where, "one prior per state required")
    states = []
    for i, entry in enumerate(raw_states):
        _, source = _member_source(decl, entry, f"{where}.states[{i}]")
        _check_dim(source, dimension, f"{where}.states[{i}]")
        states.append(source)
    return _EnsembleSpec(priors, tuple(states))


def _selector_shape_ok(value) -> bool:
    if isinstance(value, list):
        return all(isinstance(x, str) for x in value) and bool(value)
    if isinstance(value, dict):
        return set(value) == {"time", "label"} and isinstance(value["label"], str)
    return False


def _validate_command(kind: str, args: dict, scn: "Scenario", where: str) -> None:
    def need(key: str, kinds=(str,)):
        if key not in args:
            raise _fail(where, f"missing argument {key!r}")
        if not isinstance(args[key], kinds) or isinstance(args[key], bool):
            raise _fail(where, f"argument {key!r} has the wrong type")

    def known(key: str, table: dict, what: str) -> None:
        need(key)
        if args[key] not in table:
            raise UnknownReference(f"{where}: no {what} named {args[key]!r}")

    allowed = {
        "validate-pdi": {"pdi"},
        "conjunction": {"left", "right"},
        "refinement": {"left", "right"},
        "compatibility": {"left", "right"},
        "consistency": {"family", "mode"},
        "probabilities": {"family"},
        "marginal": {"family", "time"},
        "conditional": {"family", "given", "target"},
        "measure-model": {"model", "amplitudes"},
        "retrodict": {"model", "amplitudes", "pointer"},
        "channel": {"ensemble", "measurement"},
        "dense-coding": {"dimension"},
    }[kind]
    extra = set(args) - allowed
    if extra:
        raise _fail(where, f"unknown arguments {sorted(extra)}")

    if kind == "validate-pdi":
        known("pdi", scn.pdis, "framework")
    elif kind in ("conjunction",):
        for key in ("left", "right"):
            need(key)
            if args[key] not in scn.kets and args[key] not in scn.operators:
                raise UnknownReference(
                    f"{where}: no ket or operator named {args[key]!r}"
                )
    elif kind in ("refinement", "compatibility"):
        known("left", scn.pdis, "framework")
        known("right", scn.pdis, "framework")
    elif kind == "consistency":
        known("family", scn.families, "family")
        mode = args.get("mode", "strong")
        if mode not in ("strong", "weak"):
            raise _fail(where, f"mode must be 'strong' or 'weak', got {mode!r}")
    elif kind == "probabilities":
        known("family", scn.families, "family")
    elif kind == "marginal":
        known("family", scn.families, "family")
        need("time", (int,))
    elif kind == "conditional":
        known("family", scn.families, "family")
        for key in ("given", "target"):
            if key not in args or not _selector_shape_ok(args[key]):
                raise _fail(
                    where,
                    f"argument {key!r} must be a label list or {{time, label}}",
                )
    elif kind in ("measure-model", "retrodict"):
        known("model", scn.models, "model")
        _parse_amplitudes(args.get("amplitudes"), f"{where}.amplitudes")
        if kind == "retrodict":
            need("pointer")
            ds = len(scn.models[args["model"]].system_basis)
            valid = {f"M{k + 1}" for k in range(ds)}
            if args["pointer"] not in valid:
                raise UnknownReference(
                    f"{where}: pointer {args['pointer']!r} not among {sorted(valid)}"
                )
    elif kind == "channel":
        known("ensemble", scn.ensembles, "ensemble")
        known("measurement", scn.pdis, "framework")
    elif kind == "dense-coding":
        need("dimension", (int,))
        if not 2 <= args["dimension"] <= 8:
            raise _fail(where, "dimension must lie in 2..8")


def parse_scenario(source) -> Scenario:
    """Parse a scenario from a path or from YAML text.

    Strings containing a newline are treated as document text; anything
    else is a file path.  Declared kets are normalized on load (with a
    warning when the norm is off by more than 1e-6); every reference is
    resolved before this returns.
    """
    if isinstance(source, Path):
        text = source.read_text(encoding="utf-8")
    elif isinstance(source, str) and "\n" not in source:
        path = Path(source)
        if not path.exists():
            raise ParseError(f"no such scenario file: {source}")
        text = path.read_text(encoding="utf-8")
    else:
        text = str(source)

    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"not parseable as yaml: {exc}") from exc
    doc = _require_map(doc, "document")
    unknown = set(doc) - {
        "schema", "dimension", "kets", "operators", "pdis", "families",
        "models", "ensembles", "commands",
    }
    if unknown:
        raise _fail("document", f"unknown keys {sorted(unknown)}")
    if doc.get("schema") != SCHEMA_VERSION:
        raise _fail("document", f"schema must be {SCHEMA_VERSION}")
    dimension = doc.get("dimension")
    if not isinstance(dimension, int) or isinstance(dimension, bool) or dimension < 1:
        raise _fail("document", "dimension must be a positive integer")

    decl = _Declarations()
    for name, raw in _require_map(doc.get("kets", {}) or {}, "kets").items():
        name = str(name)
        ket = _parse_ket(raw, f"kets.{name}")
        norm = float(np.linalg.norm(ket))
        if norm <= 1e-12:
            raise _fail(f"kets.{name}", "ket has zero norm")
        if abs(norm - 1.0) > _NORM_WARN:
            warnings.warn(
                f"ket {name!r} has norm {norm:.6g}; normalizing", stacklevel=2
            )
        decl.kets[name] = ket / norm
    for name, raw in _require_map(doc.get("operators", {}) or {}, "operators").items():
        name = str(name)
        if name in decl.kets:
            raise _fail(f"operators.{name}", "name already used for a ket")
        decl.operators[name] = _parse_matrix(raw, f"operators.{name}")

    pdis: dict[str, _PdiSpec] = {}
    for name, raw in _require_map(doc.get("pdis", {}) or {}, "pdis").items():
        name = str(name)
        spec = _require_map(raw, f"pdis.{name}")
        extra = set(spec) - {"members", "labels"}
        if extra:
            raise _fail(f"pdis.{name}", f"unknown keys {sorted(extra)}")
        labels, sources = _parse_member_list(decl, spec, dimension, f"pdis.{name}")
        pdis[name] = _PdiSpec(labels, sources)

    families: dict[str, _FamilySpec] = {}
    for name, raw in _require_map(doc.get("families", {}) or {}, "families").items():
        families[str(name)] = _parse_family(
            decl, pdis, raw, dimension, f"families.{name}"
        )

    models: dict[str, _ModelSpec] = {}
    for name, raw in _require_map(doc.get("models", {}) or {}, "models").items():
        models[str(name)] = _parse_model(decl, raw, dimension, f"models.{name}")

    ensembles: dict[str, _EnsembleSpec] = {}
    for name, raw in _require_map(doc.get("ensembles", {}) or {}, "ensembles").items():
        ensembles[str(name)] = _parse_ensemble(
            decl, raw, dimension, f"ensembles.{name}"
        )

    raw_commands = doc.get("commands", [])
    commands: list[Command] = []
    scenario = Scenario(
        dimension, decl.kets, decl.operators, pdis, families, models, ensembles, (),
    )
    for i, raw in enumerate(_require_list(raw_commands, "commands")):
        where = f"commands[{i}]"
        entry = _require_map(raw, where)
        if len(entry) != 1:
            raise _fail(where, "each command is a single {verb: arguments} mapping")
        kind, raw_args = next(iter(entry.items()))
        if kind not in COMMAND_KINDS:
            raise _fail(where, f"unknown command {kind!r}")
        args = _require_map(raw_args if raw_args is not None else {}, where)
        _validate_command(kind, args, scenario, where)
        commands.append(Command(kind, args))

    return Scenario(
        dimension, decl.kets, decl.operators, pdis, families, models, ensembles,
        tuple(commands),
    )


# --- execution --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Section:
    index: int
    kind: str
    inputs: dict
    status: str
    payload: dict


@dataclass(frozen=True, eq=False)
class Report:
    schema: int
    engine: str
    profile: str
    sections: tuple[Section, ...]


class _Runtime:
    """Builds declared entities on demand and caches them."""

    def __init__(self, scenario: Scenario, tol: Tolerances):
        self.scenario = scenario
        self.tol = tol
        self._pdis: dict[str, Any] = {}
        self._families: dict[str, HistoryFamily] = {}
        self._tables: dict[str, ProbabilityTable] = {}
        self._models: dict[str, Any] = {}
        self._ensembles: dict[str, Any] = {}

    def property_for(self, name: str) -> Projector:
        return make_projector(self.scenario.kets.get(name, self.scenario.operators.get(name)), tol=self.tol)

    def pdi(self, name: str):
        if name not in self._pdis:
            spec = self.scenario.pdis[name]
            members = [make_projector(src, tol=self.tol) for src in spec.sources]
            self._pdis[name] = validate_pdi(members, spec.labels, tol=self.tol)
        return self._pdis[name]

    def family(self, name: str) -> HistoryFamily:
        if name not in self._families:
            spec = self.scenario.families[name]
            if spec.initial_kind == "pure":
                initial = InitialCondition.pure(spec.initial, self.tol)
            else:
                initial = InitialCondition.density(spec.initial, self.tol)
            steps = len(spec.times) - 1
            kwargs: dict[str, Any] = {}
            if spec.dynamics == "identity":
                eye = np.eye(self.scenario.dimension, dtype=np.complex128)
                kwargs["propagators"] = tuple(eye for _ in range(steps))
            elif spec.dynamics == "hamiltonian":
                kwargs["hamiltonian"] = spec.hamiltonian
                kwargs["hbar"] = spec.hbar
            else:
                kwargs["propagators"] = spec.propagators
            events = []
            for slot_kind, payload in spec.slots:
                if slot_kind == "pdi":
                    events.append(self.pdi(payload))
                else:
                    events.append(
                        [
                            (label, make_projector(src, tol=self.tol))
                            for label, src in payload
                        ]
                    )
            self._families[name] = build_family(
                initial, spec.times, events=events, tol=self.tol, **kwargs
            )
        return self._families[name]

    def table(self, name: str) -> ProbabilityTable:
        if name not in self._tables:
            self._tables[name] = assign_probabilities(self.family(name), self.tol)
        return self._tables[name]

    def model(self, name: str):
        if name not in self._models:
            spec = self.scenario.models[name]
            self._models[name] = build_measurement_model(
                spec.system_basis, spec.ready, spec.pointers, spec.post, tol=self.tol
            )
        return self._models[name]

    def ensemble(self, name: str):
        if name not in self._ensembles:
            spec = self.scenario.ensembles[name]
            self._ensembles[name] = make_ensemble(
                list(zip(spec.priors, spec.states)), tol=self.tol
            )
        return self._ensembles[name]


def _expand_selector(rt: _Runtime, family_name: str, selector) -> list[str]:
    family = rt.family(family_name)
    if isinstance(selector, list):
        return [str(s) for s in selector]
    time_index = int(selector["time"])
    label = selector["label"]
    if family.slots is None or not 1 <= time_index <= family.steps:
        raise ExecutionError(
            f"selector time {time_index} not available for family {family_name!r}"
        )
    slot = family.slots[time_index - 1]
    if label not in slot.labels:
        raise ExecutionError(
            f"no event labelled {label!r} at time index {time_index}"
        )
    member = slot.labels.index(label)
    return [
        h.label for h in family.histories if h.alpha[time_index - 1] == member
    ]


def _h_validate_pdi(rt: _Runtime, args: dict) -> dict:
    try:
        pdi = rt.pdi(args["pdi"])
    except (NotAProjector, IncompletePDI, NotOrthogonal, ZeroVector) as exc:
        return {"verdict": "INVALID", "reason": str(exc)}
    return {
        "verdict": "VALID",
        "dimension": pdi.dim,
        "members": [(l, p.rank) for l, p in zip(pdi.labels, pdi.projectors)],
    }


def _h_conjunction(rt: _Runtime, args: dict) -> dict:
    left = rt.property_for(args["left"])
    right = rt.property_for(args["right"])
    try:
        result = conjunction(left, right, tol=rt.tol)
    except MeaninglessError as exc:
        return {"verdict": "MEANINGLESS", "commutator_norm": exc.commutator_norm}
    return {"verdict": "DEFINED", "rank": result.rank}


def _h_refinement(rt: _Runtime, args: dict) -> dict:
    try:
        refined = common_refinement(rt.pdi(args["left"]), rt.pdi(args["right"]), tol=rt.tol)
    except IncompatibleError as exc:
        return {
            "verdict": "INCOMPATIBLE",
            "left_member": exc.left_label,
            "right_member": exc.right_label,
            "commutator_norm": exc.commutator_norm,
        }
    return {
        "verdict": "REFINED",
        "members": [(l, p.rank) for l, p in zip(refined.labels, refined.projectors)],
    }


def _h_compatibility(rt: _Runtime, args: dict) -> dict:
    answer = compatible(rt.pdi(args["left"]), rt.pdi(args["right"]), tol=rt.tol)
    return {"compatible": answer}


def _h_consistency(rt: _Runtime, args: dict) -> dict:
    mode = args.get("mode", "strong")
    report = consistency_check(rt.family(args["family"]), mode, rt.tol)
    payload = {
        "mode": mode,
        "verdict": "CONSISTENT" if report.consistent else "INCONSISTENT",
        "histories": report.gram.shape[0],
        "worst_offdiag": report.worst_offdiag,
    }
    if report.offending_pair is not None:
        payload["offending_pair"] = list(report.offending_pair)
    return payload


def _h_probabilities(rt: _Runtime, args: dict) -> dict:
    try:
        table = rt.table(args["family"])
    except InconsistentFamily as exc:
        payload = {
            "verdict": "INCONSISTENT",
            "worst_offdiag": exc.report.worst_offdiag,
        }
        if exc.report.offending_pair is not None:
            payload["offending_pair"] = list(exc.report.offending_pair)
        return payload
    return {
        "verdict": "ASSIGNED",
        "table": table.as_pairs(),
        "normalization": table.normalization,
    }


def _h_marginal(rt: _Runtime, args: dict) -> dict:
    table = rt.table(args["family"])
    pairs = marginal_distribution(table, int(args["time"]))
    return {"time": int(args["time"]), "table": pairs}


def _h_conditional(rt: _Runtime, args: dict) -> dict:
    try:
        table = rt.table(args["family"])
        given = _expand_selector(rt, args["family"], args["given"])
        target = _expand_selector(rt, args["family"], args["target"])
        value = conditional_probability(table, given, target, rt.tol)
    except InconsistentFamily as exc:
        return {"verdict": "INCONSISTENT", "worst_offdiag": exc.report.worst_offdiag}
    except ZeroConditioningEvent as exc:
        return {"verdict": "UNDEFINED", "reason": str(exc)}
    return {"verdict": "DEFINED", "value": value}


def _h_measure_model(rt: _Runtime, args: dict) -> dict:
    model = rt.model(args["model"])
    amplitudes = _parse_amplitudes(args["amplitudes"], "amplitudes")
    _, dist = family_pointer(model, amplitudes, rt.tol)
    return {"pointers": dist.as_pairs()}


def _h_retrodict(rt: _Runtime, args: dict) -> dict:
    model = rt.model(args["model"])
    amplitudes = _parse_amplitudes(args["amplitudes"], "amplitudes")
    pointer = int(args["pointer"][1:]) - 1
    try:
        values = retrodict(model, amplitudes, pointer, rt.tol)
    except ZeroConditioningEvent as exc:
        return {"verdict": "UNDEFINED", "reason": str(exc)}
    table = [
        (model.system_label(j), float(v)) for j, v in enumerate(values)
    ]
    return {"verdict": "DEFINED", "pointer": args["pointer"], "table": table}


def _h_channel(rt: _Runtime, args: dict) -> dict:
    report = channel_experiment(
        rt.scenario.dimension,
        rt.ensemble(args["ensemble"]),
        rt.pdi(args["measurement"]),
        tol=rt.tol,
    )
    return {
        "mutual_information_bits": report.mutual_information_bits,
        "holevo_bits": report.holevo_bits,
        "bound_bits": report.bound_bits,
        "achieves_bound": report.achieves_bound,
    }


def _h_dense_coding(rt: _Runtime, args: dict) -> dict:
    report = dense_coding_demo(int(args["dimension"]), tol=rt.tol)
    return {
        "dimension": report.dimension,
        "messages": report.messages,
        "bits": report.bits,
        "qudits": report.qudits,
        "per_qudit_bound_bits": report.per_qudit_bound_bits,
        "mutual_information_bits": report.channel.mutual_information_bits,
        "bound_respected": report.bound_respected,
    }


_HANDLERS: dict[str, Callable[[_Runtime, dict], dict]] = {
    "validate-pdi": _h_validate_pdi,
    "conjunction": _h_conjunction,
    "refinement": _h_refinement,
    "compatibility": _h_compatibility,
    "consistency": _h_consistency,
    "probabilities": _h_probabilities,
    "marginal": _h_marginal,
    "conditional": _h_conditional,
    "measure-model": _h_measure_model,
    "retrodict": _h_retrodict,
    "channel": _h_channel,
    "dense-coding": _h_dense_coding,
}


def run_scenario(
    scenario: Scenario,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    profile: str = "default",
) -> Report:
    """Execute every command in order.

    Physics verdicts land in the report; anything else aborts the run with
    ExecutionError naming the failing command.
    """
    rt = _Runtime(scenario, tolerances)
    sections = []
    for i, command in enumerate(scenario.commands, start=1):
        handler = _HANDLERS[command.kind]
        try:
            payload = handler(rt, command.args)
        except ExecutionError:
            raise
        except (QHistoriesError, ValueError, ArithmeticError, KeyError) as exc:
            raise ExecutionError(
                f"command {i} ({command.kind}) failed: {exc}"
            ) from exc
        sections.append(Section(i, command.kind, dict(command.args), "ok", payload))
    return Report(SCHEMA_VERSION, __version__, profile, tuple(sections))


# --- rendering ------------------------------------------------------------


def _fmt_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value + 0.0:.6f}"
    return str(value)


def _is_pair_table(value) -> bool:
    return (
        isinstance(value, list)
        and bool(value)
        and all(
            isinstance(row, (list, tuple))
            and len(row) == 2
            and isinstance(row[0], str)
            and isinstance(row[1], (int, float))
            for row in value
        )
    )


def _render_text(report: Report) -> str:
    lines = [
        "qhistories report",
        f"schema: {report.schema}",
        f"engine: {report.engine}",
        f"tolerances: {report.profile}",
        f"commands: {len(report.sections)}",
    ]
    for section in report.sections:
        lines.append("")
        lines.append(f"[{section.index}] {section.kind}")
        if section.inputs:
            lines.append("  input:")
            for key, value in section.inputs.items():
                lines.append(f"    {key}: {json.dumps(value, sort_keys=True)}")
        lines.append(f"  status: {section.status}")
        for key, value in section.payload.items():
            if _is_pair_table(value):
                lines.append(f"  {key}:")
                width = max(len(label) for label, _ in value)
                for label, number in value:
                    lines.append(f"    {label.ljust(width)}  {_fmt_scalar(number)}")
            elif isinstance(value, list):
                lines.append(f"  {key}: {json.dumps(value, sort_keys=True)}")
            else:
                lines.append(f"  {key}: {_fmt_scalar(value)}")
    lines.append("")
    return "\n".join(lines)


def _json_safe(value):
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, float):
        return round(value + 0.0, 10)
    if isinstance(value, (int, str)):
        return value
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _render_machine(report: Report) -> str:
    doc = {
        "schema": report.schema,
        "engine": report.engine,
        "tolerances": report.profile,
        "sections": [
            {
                "index": s.index,
                "kind": s.kind,
                "inputs": _json_safe(s.inputs),
                "status": s.status,
                "payload": _json_safe(s.payload),
            }
            for s in report.sections
        ],
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def render_report(report: Report, format: str = "text") -> bytes:
    """Serialize a report; identical input yields identical bytes."""
    if format == "text":
        return _render_text(report).encode("utf-8")
    if format == "machine":
        return _render_machine(report).encode("utf-8")
    raise ValueError(f"format must be 'text' or 'machine', got {format!r}")
