"""Reading and writing the tool's structured artifacts.

System-description files are JSON with all polynomials as grammar text. Named
constants declared in the file are substituted at parse time, so a single file
can be re-evaluated at different parameter bounds (the `--param-bound` flag
overrides the constant named by `param_bound_constant`). Serialization back to
canonical text (graded-lex term order) makes fingerprints independent of the
formatting of the source file.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from . import __version__
from .hybrid import (
    Edge,
    GuardSet,
    HybridSystem,
    Mode,
    ParameterSet,
    SemialgebraicSet,
    validate,
)
from .polynomials import Polynomial, VariableRegistry, parse

__all__ = [
    "load_system",
    "system_to_dict",
    "fingerprint_system",
    "RunManifest",
    "write_manifest",
    "bundled_system_path",
    "canonical_json",
]


class SystemFormatError(ValueError):
    pass


def bundled_system_path(name: str) -> Path:
    """Resolve a bundled system name like 'example2' to its packaged file."""
    fname = name if name.endswith(".json") else f"{name}.json"
    ref = resources.files("zenocert") / "systems" / fname
    with resources.as_file(ref) as p:
        if not p.exists():
            raise FileNotFoundError(f"no bundled system named {name!r}")
        return Path(p)


def _resolve_path(spec: str | Path) -> Path:
    p = Path(spec)
    if p.exists():
        return p
    if not str(spec).endswith(".json"):
        try:
            return bundled_system_path(str(spec))
        except FileNotFoundError:
            pass
    raise FileNotFoundError(f"system file {spec!r} not found")


def _parse_ineq_list(entries: Any, reg: VariableRegistry,
                     constants: Mapping[str, float], where: str
                     ) -> tuple[tuple[Polynomial, ...], tuple[bool, ...]]:
    polys: list[Polynomial] = []
    stricts: list[bool] = []
    for i, ent in enumerate(entries or []):
        if isinstance(ent, str):
            text, strict = ent, False
        elif isinstance(ent, dict):
            text, strict = ent["expr"], bool(ent.get("strict", False))
        else:
            raise SystemFormatError(f"{where}[{i}]: expected text or {{expr, strict}}")
        polys.append(parse(text, reg, constants))
        stricts.append(strict)
    return tuple(polys), tuple(stricts)


def _const_value(v: Any, reg: VariableRegistry, constants: Mapping[str, float],
                 where: str) -> float:
    if isinstance(v, (int, float)):
        return float(v)
    p = parse(str(v), reg, constants)
    if p.degree() > 0:
        raise SystemFormatError(f"{where}: {v!r} is not a constant expression")
    return p.constant_term()


def load_system(spec: str | Path,
                constants_override: Mapping[str, float] | None = None,
                param_bound: float | None = None) -> HybridSystem:
    """Load a system-description JSON file (or bundled name) into a validated
    HybridSystem."""
    path = _resolve_path(spec)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SystemFormatError(f"{path}: line {exc.lineno}, col {exc.colno}: {exc.msg}") from exc
    return system_from_dict(data, constants_override, param_bound,
                            default_name=path.stem)


def system_from_dict(data: Mapping[str, Any],
                     constants_override: Mapping[str, float] | None = None,
                     param_bound: float | None = None,
                     default_name: str = "") -> HybridSystem:
    try:
        state = list(data["variables"])
        params = list(data.get("parameters", []))
        reg = VariableRegistry.make(state, params)
        constants = {k: float(v) for k, v in dict(data.get("constants", {})).items()}
        if constants_override:
            constants.update({k: float(v) for k, v in constants_override.items()})
        if param_bound is not None:
            key = data.get("param_bound_constant", "C")
            if key not in constants:
                raise SystemFormatError(
                    f"--param-bound given but constant {key!r} is not declared")
            constants[key] = float(param_bound)

        ps_data = data.get("parameter_set", {})
        ps_ineq, ps_strict = _parse_ineq_list(
            ps_data.get("inequalities", []), reg, constants, "parameter_set")
        box = tuple(
            (_const_value(lo, reg, constants, "parameter_set.box"),
             _const_value(hi, reg, constants, "parameter_set.box"))
            for lo, hi in ps_data.get("box", []))
        pset = ParameterSet(ps_ineq, ps_strict, box)

        modes = []
        for md in data["modes"]:
            if "domain_pieces" in md:
                raw_pieces = md["domain_pieces"]
            else:
                raw_pieces = [md["domain"]]
            pieces = []
            for pi, raw in enumerate(raw_pieces):
                ineq, strict = _parse_ineq_list(
                    raw, reg, constants, f"mode {md['id']} domain piece {pi}")
                pieces.append(SemialgebraicSet(ineq, strict))
            nb_ineq, nb_strict = _parse_ineq_list(
                md.get("neighborhood", []), reg, constants, f"mode {md['id']} neighborhood")
            modes.append(Mode(
                id=int(md["id"]),
                pieces=tuple(pieces),
                field_=tuple(parse(t, reg, constants) for t in md["field"]),
                neighborhood=SemialgebraicSet(nb_ineq, nb_strict),
                anchor=tuple(float(v) for v in md["anchor"]),
            ))

        edges = []
        for ed in data["edges"]:
            gi, _ = _parse_ineq_list(ed.get("guard_ineq", []), reg, constants,
                                     f"edge ({ed['from']},{ed['to']}) guard")
            edges.append(Edge(
                source=int(ed["from"]),
                target=int(ed["to"]),
                guard=GuardSet(parse(ed["guard_eq"], reg, constants), gi),
                reset=tuple(parse(t, reg, constants) for t in ed["reset"]),
                r_hint=float(ed["r_hint"]) if "r_hint" in ed else None,
            ))
    except KeyError as exc:
        raise SystemFormatError(f"missing required field {exc}") from exc

    system = HybridSystem(reg, tuple(modes), tuple(edges), pset,
                          name=str(data.get("name", default_name)))
    rep = validate(system)
    if not rep.ok:
        raise SystemFormatError(f"system fails validation: {rep.problems}")
    return system


def _set_to_dict(s: SemialgebraicSet) -> list[Any]:
    out: list[Any] = []
    for g, strict in zip(s.inequalities, s.strict):
        out.append({"expr": g.to_text(), "strict": True} if strict else g.to_text())
    return out


def system_to_dict(system: HybridSystem) -> dict[str, Any]:
    """Canonical dictionary form (constants already substituted)."""
    reg = system.registry
    out: dict[str, Any] = {
        "name": system.name,
        "variables": list(reg.state_names),
        "parameters": list(reg.param_names),
        "modes": [],
        "edges": [],
    }
    ps = system.parameter_set
    if not ps.empty or ps.box:
        out["parameter_set"] = {
            "inequalities": [
                {"expr": g.to_text(), "strict": True} if s else g.to_text()
                for g, s in zip(ps.inequalities, ps.strict)],
            "box": [[lo, hi] for lo, hi in ps.box],
        }
    for m in system.modes:
        md: dict[str, Any] = {"id": m.id}
        if len(m.pieces) == 1:
            md["domain"] = _set_to_dict(m.pieces[0])
        else:
            md["domain_pieces"] = [_set_to_dict(p) for p in m.pieces]
        md["field"] = [f.to_text() for f in m.field_]
        md["neighborhood"] = _set_to_dict(m.neighborhood)
        md["anchor"] = list(m.anchor)
        out["modes"].append(md)
    for e in system.edges:
        ed = {
            "from": e.source,
            "to": e.target,
            "guard_eq": e.guard.equality.to_text(),
            "guard_ineq": [g.to_text() for g in e.guard.inequalities],
            "reset": [phi.to_text() for phi in e.reset],
        }
        if e.r_hint is not None:
            ed["r_hint"] = e.r_hint
        out["edges"].append(ed)
    return out


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def fingerprint_system(system: HybridSystem) -> str:
    return hashlib.sha256(canonical_json(system_to_dict(system)).encode()).hexdigest()


@dataclass
class RunManifest:
    command: str
    config_hash: str
    input_hash: str
    tool_version: str
    seed: int
    wall_time_s: float

    @staticmethod
    def create(command: str, config: Mapping[str, Any], input_hash: str,
               seed: int, started: float) -> "RunManifest":
        cfg_hash = hashlib.sha256(canonical_json(dict(config)).encode()).hexdigest()
        return RunManifest(command=command, config_hash=cfg_hash,
                           input_hash=input_hash, tool_version=__version__,
                           seed=seed, wall_time_s=round(time.time() - started, 3))


def write_manifest(out_dir: Path, manifest: RunManifest) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "run_manifest.json"
    path.write_text(json.dumps(asdict(manifest), indent=2, sort_keys=True) + "\n")
    return path
