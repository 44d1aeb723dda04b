"""JSON model files and line-oriented transcripts.

A model file holds a scenario and exactly one of three sections:
``behavior``, ``hv_model`` or ``quantum``. The schema is described in
``docs/file-format.md``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional, TextIO

import numpy as np

from .core import EPS_NORM, Behavior, Component, HvModel, Scenario, SettingPolicy, validate_behavior
from .errors import BellkitError, InvariantError, StructureError
from .quantum import MeasurementDirection, TwoQubitState, pure_state_behavior, singlet_behavior, singlet_state
from .simulator import Transcript

FORMAT_VERSION = 1
SECTIONS = ("behavior", "hv_model", "quantum")


class ModelSyntaxError(BellkitError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class SchemaError(BellkitError):
    """Unknown, missing or mistyped field; ``path`` locates it."""

    def __init__(self, message: str, path: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class DimensionError(StructureError):
    def __init__(self, message: str, path: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class ModelInvariantError(InvariantError):
    pass


@dataclass(frozen=True, eq=False)
class QuantumSection:
    """Pure two-qubit state plus measurement directions per side.

    ``state`` is either the string ``"singlet"`` or four complex amplitudes;
    ``dirs_a``/``dirs_b`` keep the file's own notation (angles or vectors)
    so that serialization round-trips.
    """

    state: Any
    dirs_a: tuple
    dirs_b: tuple
    notation_a: str = "angles"
    notation_b: str = "angles"

    def directions(self, side: str) -> list[MeasurementDirection]:
        entries, notation = (self.dirs_a, self.notation_a) if side == "a" else (self.dirs_b, self.notation_b)
        out = []
        for e in entries:
            if notation == "vectors":
                out.append(MeasurementDirection(*e))
            elif isinstance(e, tuple):
                out.append(MeasurementDirection.from_angles(*e))
            else:
                out.append(MeasurementDirection.from_angles(e))
        return out

    def behavior(self) -> Behavior:
        da, db = self.directions("a"), self.directions("b")
        if self.state == "singlet":
            return singlet_behavior(da, db)
        return pure_state_behavior(TwoQubitState(self.state), da, db)

    def to_dict(self) -> dict:
        out: dict = {}
        if isinstance(self.state, str):
            out["preset"] = self.state
        else:
            out["amplitudes"] = [[float(np.real(z)), float(np.imag(z))] for z in self.state]
        for side, entries, notation in (("a", self.dirs_a, self.notation_a), ("b", self.dirs_b, self.notation_b)):
            out[f"{notation}_{side}"] = [list(e) if isinstance(e, tuple) else e for e in entries]
        return out


@dataclass(frozen=True, eq=False)
class ModelFile:
    scenario: Scenario
    behavior: Optional[Behavior] = None
    hv_model: Optional[HvModel] = None
    quantum: Optional[QuantumSection] = None
    metadata: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        present = [s for s in SECTIONS if getattr(self, s) is not None]
        if len(present) != 1:
            raise SchemaError(f"exactly one of {SECTIONS} is required, found {present or 'none'}", "$")

    @property
    def kind(self) -> str:
        return next(s for s in SECTIONS if getattr(self, s) is not None)

    def as_behavior(self) -> Behavior:
        """The observable behavior: averaged over ``lam`` for hidden-variable models."""
        from .core import averaged_behavior

        if self.behavior is not None:
            return self.behavior
        if self.hv_model is not None:
            return averaged_behavior(self.hv_model)
        return self.quantum.behavior()

    def as_model(self) -> HvModel:
        """The hidden-variable model, or a single-component view of a bare behavior."""
        if self.hv_model is not None:
            return self.hv_model
        return HvModel.single(self.as_behavior())

    def to_dict(self) -> dict:
        s = self.scenario
        out: dict = {"format_version": self.format_version,
                     "scenario": {"nA": s.nA, "nB": s.nB, "nX": s.nX, "nY": s.nY}}
        if self.metadata:
            out["metadata"] = dict(self.metadata)
        if self.behavior is not None:
            out["behavior"] = {"p": self.behavior.p.tolist()}
        elif self.hv_model is not None:
            comps = []
            for i, c in enumerate(self.hv_model.components):
                entry: dict = {"weight": c.weight}
                if c.policy is not None:
                    entry["policy"] = c.policy.q.tolist()
                entry["behavior"] = c.behavior.p.tolist()
                if self.hv_model.labels is not None:
                    entry["psi"], entry["xi"] = self.hv_model.labels[i]
                comps.append(entry)
            out["hv_model"] = {"components": comps}
        else:
            out["quantum"] = self.quantum.to_dict()
        return out

    def __eq__(self, other):
        if not isinstance(other, ModelFile):
            return NotImplemented
        return self.to_dict() == other.to_dict()


# -- parsing ------------------------------------------------------------------


def _expect_keys(obj, allowed: set, required: set, path: str) -> dict:
    if not isinstance(obj, dict):
        raise SchemaError(f"expected an object, got {type(obj).__name__}", path)
    for key in obj:
        if key not in allowed:
            raise SchemaError(f"unknown field {key!r}", f"{path}.{key}")
    for key in required:
        if key not in obj:
            raise SchemaError(f"missing required field {key!r}", path)
    return obj


def _number(value, path: str) -> float:
    if isinstance(value, bool):
        raise SchemaError("expected a number, got a boolean", path)
    if isinstance(value, (int, float)):
        out = float(value)
    elif isinstance(value, str):
        try:
            out = float(value.strip())
        except ValueError:
            raise SchemaError(f"expected a decimal number, got {value!r}", path) from None
    else:
        raise SchemaError(f"expected a number, got {type(value).__name__}", path)
    if not np.isfinite(out):
        raise SchemaError(f"non-finite number {value!r}", path)
    return out


def _count(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise SchemaError(f"expected a positive integer, got {value!r}", path)
    return value


def _array(value, shape: tuple, path: str) -> np.ndarray:
    """Nested lists of numbers with exactly ``shape``."""
    if not shape:
        return np.array(_number(value, path))
    if not isinstance(value, list):
        raise DimensionError(f"expected a list of length {shape[0]}, got {type(value).__name__}", path)
    if len(value) != shape[0]:
        raise DimensionError(f"expected length {shape[0]}, got {len(value)}", path)
    return np.stack([_array(v, shape[1:], f"{path}[{i}]") for i, v in enumerate(value)])


def _invariant_error(report, prefix: str) -> ModelInvariantError:
    first = report[0]
    where = first.location
    if first.kind == "normalization" and len(where) >= 2:
        where_text = f"settings cell (a,b)={where[-2:]}"
    else:
        where_text = f"cell {where}"
    return ModelInvariantError(
        f"{prefix}{first.part} {first.kind} at {where_text}: deviation {first.magnitude:.3g}", report
    )


def _parse_scenario(obj) -> Scenario:
    _expect_keys(obj, {"nA", "nB", "nX", "nY"}, {"nA", "nB", "nX", "nY"}, "$.scenario")
    return Scenario(*(_count(obj[k], f"$.scenario.{k}") for k in ("nA", "nB", "nX", "nY")))


def _parse_behavior(obj, s: Scenario, tol: float) -> Behavior:
    _expect_keys(obj, {"p"}, {"p"}, "$.behavior")
    b = Behavior(s, _array(obj["p"], s.shape, "$.behavior.p"))
    report = validate_behavior(b, tol)
    if report:
        raise _invariant_error(report, "behavior: ")
    return b


def _parse_hv(obj, s: Scenario, tol: float) -> HvModel:
    _expect_keys(obj, {"components"}, {"components"}, "$.hv_model")
    comps_raw = obj["components"]
    if not isinstance(comps_raw, list) or not comps_raw:
        raise SchemaError("expected a non-empty list of components", "$.hv_model.components")
    comps, labels = [], []
    for i, c in enumerate(comps_raw):
        path = f"$.hv_model.components[{i}]"
        _expect_keys(c, {"weight", "policy", "behavior", "psi", "xi"}, {"weight", "behavior"}, path)
        policy = None
        if "policy" in c:
            policy = SettingPolicy(_array(c["policy"], (s.nA, s.nB), f"{path}.policy"))
        beh = Behavior(s, _array(c["behavior"], s.shape, f"{path}.behavior"))
        comps.append(Component(_number(c["weight"], f"{path}.weight"), beh, policy))
        if ("psi" in c) != ("xi" in c):
            raise SchemaError("psi and xi tags must be given together", path)
        if "psi" in c:
            for key in ("psi", "xi"):
                if not isinstance(c[key], (str, int)) or isinstance(c[key], bool):
                    raise SchemaError("tag must be a string or integer", f"{path}.{key}")
            labels.append((str(c["psi"]), str(c["xi"])))
    if labels and len(labels) != len(comps):
        raise SchemaError("psi/xi tags must be present on every component or none", "$.hv_model.components")
    model = HvModel(s, tuple(comps), tuple(labels) if labels else None)
    report = model.validate(tol)
    if report:
        first = report[0]
        prefix = f"component {first.location[0]} " if first.location and first.kind not in ("weight-normalization",) else ""
        if first.kind.startswith("weight"):
            raise ModelInvariantError(f"{first.kind}: deviation {first.magnitude:.3g}", report)
        raise _invariant_error(report, prefix)
    return model


def _parse_directions(obj, side: str, path: str):
    has_angles, has_vectors = f"angles_{side}" in obj, f"vectors_{side}" in obj
    if has_angles == has_vectors:
        raise SchemaError(f"exactly one of angles_{side} or vectors_{side} is required", path)
    key = f"angles_{side}" if has_angles else f"vectors_{side}"
    raw = obj[key]
    if not isinstance(raw, list) or not raw:
        raise SchemaError("expected a non-empty list", f"{path}.{key}")
    entries = []
    for i, e in enumerate(raw):
        epath = f"{path}.{key}[{i}]"
        if has_vectors:
            entries.append(tuple(float(v) for v in _array(e, (3,), epath)))
        elif isinstance(e, list):
            entries.append(tuple(float(v) for v in _array(e, (2,), epath)))
        else:
            entries.append(_number(e, epath))
    return tuple(entries), "angles" if has_angles else "vectors"


def _parse_quantum(obj, s: Scenario) -> QuantumSection:
    path = "$.quantum"
    _expect_keys(obj, {"preset", "amplitudes", "angles_a", "angles_b", "vectors_a", "vectors_b"}, set(), path)
    if ("preset" in obj) == ("amplitudes" in obj):
        raise SchemaError("exactly one of preset or amplitudes is required", path)
    if "preset" in obj:
        if obj["preset"] != "singlet":
            raise SchemaError(f"unknown preset {obj['preset']!r}; only 'singlet' is defined", f"{path}.preset")
        state: Any = "singlet"
    else:
        amp = _array(obj["amplitudes"], (4, 2), f"{path}.amplitudes")
        state = tuple(complex(re, im) for re, im in amp)
        norm = sum(abs(z) ** 2 for z in state)
        if abs(norm - 1) > 1e-12:
            raise ModelInvariantError(f"{path}.amplitudes: squared norm {norm!r} is not 1")
    dirs_a, nota = _parse_directions(obj, "a", path)
    dirs_b, notb = _parse_directions(obj, "b", path)
    if (len(dirs_a), len(dirs_b), 2, 2) != s.shape:
        raise DimensionError(
            f"{len(dirs_a)} x {len(dirs_b)} directions with binary outcomes do not match scenario {s.shape}", path
        )
    q = QuantumSection(state, dirs_a, dirs_b, nota, notb)
    q.behavior()  # surfaces non-unit vectors as UsageError at parse time
    return q


def parse_model(text: str, tol: float = EPS_NORM) -> ModelFile:
    """Parse and validate a model document.

    Raises :class:`ModelSyntaxError` (with line and column),
    :class:`SchemaError`, :class:`DimensionError` or
    :class:`ModelInvariantError`.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    _expect_keys(doc, {"format_version", "scenario", "metadata", *SECTIONS}, {"format_version", "scenario"}, "$")
    if doc["format_version"] != FORMAT_VERSION:
        raise SchemaError(f"unsupported format_version {doc['format_version']!r}", "$.format_version")
    present = [s for s in SECTIONS if s in doc]
    if len(present) != 1:
        raise SchemaError(f"exactly one of {SECTIONS} is required, found {present or 'none'}", "$")
    metadata = doc.get("metadata", {})
    _expect_keys(metadata, {"name", "description"}, set(), "$.metadata")
    for k, v in metadata.items():
        if not isinstance(v, str):
            raise SchemaError("expected a string", f"$.metadata.{k}")
    s = _parse_scenario(doc["scenario"])
    kind = present[0]
    if kind == "behavior":
        return ModelFile(s, behavior=_parse_behavior(doc["behavior"], s, tol), metadata=metadata)
    if kind == "hv_model":
        return ModelFile(s, hv_model=_parse_hv(doc["hv_model"], s, tol), metadata=metadata)
    return ModelFile(s, quantum=_parse_quantum(doc["quantum"], s), metadata=metadata)


def serialize_model(mf: ModelFile) -> str:
    return json.dumps(mf.to_dict(), indent=2) + "\n"


def load_model(path, tol: float = EPS_NORM) -> ModelFile:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read(), tol)


def behavior_file(b: Behavior, name: str = "", description: str = "") -> ModelFile:
    meta = {k: v for k, v in (("name", name), ("description", description)) if v}
    return ModelFile(b.scenario, behavior=b, metadata=meta)


# -- transcripts --------------------------------------------------------------

TRANSCRIPT_MAGIC = "# bellkit transcript v1"


def write_transcript(t: Transcript, fh: TextIO) -> None:
    """Header lines start with ``#``; each further line is ``run lam a b x y``."""
    s = t.scenario
    fh.write(f"{TRANSCRIPT_MAGIC}\n# seed {t.seed}\n# model_digest {t.model_digest}\n")
    fh.write(f"# scenario {s.nA} {s.nB} {s.nX} {s.nY}\n# runs {len(t)}\n# columns run lam a b x y\n")
    fh.write("".join(f"{r} {l} {a} {b} {x} {y}\n" for r, l, a, b, x, y in t.runs.tolist()))


def read_transcript(fh: TextIO) -> Transcript:
    header: dict[str, str] = {}
    rows = []
    for lineno, line in enumerate(fh, start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if lineno == 1 and line != TRANSCRIPT_MAGIC:
                raise ModelSyntaxError("not a bellkit transcript", 1, 1)
            parts = line[1:].split(None, 1)
            if len(parts) == 2:
                header[parts[0]] = parts[1]
            continue
        fields = line.split()
        if len(fields) != 6:
            raise ModelSyntaxError(f"expected 6 integers, got {len(fields)} fields", lineno, 1)
        try:
            rows.append([int(f) for f in fields])
        except ValueError:
            raise ModelSyntaxError("non-integer field", lineno, 1) from None
    for key in ("seed", "model_digest", "scenario"):
        if key not in header:
            raise SchemaError(f"transcript header lacks {key!r}", "header")
    scenario = Scenario(*(int(v) for v in header["scenario"].split()))
    runs = np.array(rows, dtype=np.int64).reshape(-1, 6)
    if "runs" in header and int(header["runs"]) != len(runs):
        raise DimensionError(f"header announces {header['runs']} runs, found {len(runs)}", "body")
    return Transcript(scenario, runs, int(header["seed"]), header["model_digest"])
