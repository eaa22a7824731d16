"""Plain-text run configuration: ``key = value`` lines in three sections.

Sections are ``[solver]``, ``[monitor]``, and ``[output]``; ``#`` starts a
comment.  Unknown sections, unknown keys, malformed values, and out-of-range
theorem parameters are rejected with the offending line number.  An empty file
parses to the all-defaults configuration.  ``serialize`` emits canonical text
whose re-parse compares equal, so configurations round-trip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .monitor import S_RANGES, THEOREM_IDS, CriterionSpec
from .solver import SolverConfig


class ConfigError(ValueError):
    def __init__(self, line_no: int | None, message: str):
        self.line_no = line_no
        prefix = f"line {line_no}: " if line_no is not None else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class RunConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    theorems: tuple[str, ...] = THEOREM_IDS
    s: float = 0.2
    s_overrides: tuple[tuple[str, float], ...] = ()
    epsilon: float = 0.5
    constants_path: str = ""
    calibration_seed_count: int = 100
    calibration_n: int = 32
    #: 0 selects the mixed slope ladder; any other value pins every member.
    calibration_slope: float = 0.0
    output_dir: str = "out"
    emit_timeseries: bool = True
    emit_reports: bool = True
    emit_checkpoints: bool = False

    def specs(self) -> list[CriterionSpec]:
        overrides = dict(self.s_overrides)
        out = []
        for theorem in self.theorems:
            s_val = overrides.get(theorem, self.s)
            out.append(
                CriterionSpec(theorem, s_val if theorem in S_RANGES else None)
            )
        return out


_SOLVER_KEYS = {
    "n": int,
    "viscosity": float,
    "dt": float,
    "t_end": float,
    "dealias": bool,
    "init": str,
    "seed": int,
    "amplitude": float,
    "spectral_slope": float,
    "sample_stride": int,
}
_MONITOR_KEYS = {
    "theorems": str,
    "theorem": str,  # singular alias
    "s": float,
    "epsilon": float,
    "constants": str,
    "calibration_seed_count": int,
    "calibration_n": int,
    "calibration_slope": float,
}
_OUTPUT_KEYS = {
    "directory": str,
    "timeseries": bool,
    "reports": bool,
    "checkpoints": bool,
}
_SECTIONS = {"solver": _SOLVER_KEYS, "monitor": _MONITOR_KEYS, "output": _OUTPUT_KEYS}


def _parse_bool(raw: str, line_no: int) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ConfigError(line_no, f"expected a boolean, got {raw!r}")


def _coerce(raw: str, typ, line_no: int):
    raw = raw.strip()
    if typ is bool:
        return _parse_bool(raw, line_no)
    if typ is str:
        return raw
    try:
        return typ(raw)
    except ValueError:
        raise ConfigError(line_no, f"expected {typ.__name__}, got {raw!r}") from None


def _parse_theorem_list(raw: str, line_no: int):
    """Comma list of theorem ids, each optionally ``id:s`` for a local s."""
    if raw.strip().lower() == "all":
        return THEOREM_IDS, ()
    theorems, overrides = [], []
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        if ":" in item:
            tid, s_raw = item.split(":", 1)
            tid = tid.strip()
            s_val = _coerce(s_raw, float, line_no)
            overrides.append((tid, s_val))
        else:
            tid = item
        if tid not in THEOREM_IDS:
            raise ConfigError(
                line_no, f"unknown theorem id {tid!r}; known ids: {', '.join(THEOREM_IDS)}"
            )
        theorems.append(tid)
    if not theorems:
        raise ConfigError(line_no, "theorem list is empty")
    return tuple(theorems), tuple(overrides)


_S_RANGE_TEXT = {"T1.3ii": "0 < s < 1", "C1.4b": "0 < s < 1", "T1.4": "0 < s < 2/5", "T1.5": "0 < s < 8/29"}


def _validate_specs(cfg: RunConfig, s_line: int | None, theorems_line: int | None):
    overrides = dict(cfg.s_overrides)
    for theorem in cfg.theorems:
        if theorem not in S_RANGES:
            continue
        s_val = overrides.get(theorem, cfg.s)
        lo, hi = S_RANGES[theorem]
        if not (lo < s_val < hi):
            line = theorems_line if theorem in overrides else s_line
            raise ConfigError(
                line, f"{theorem} requires {_S_RANGE_TEXT[theorem]}, got s = {s_val:g}"
            )


def parse_config(text: str) -> RunConfig:
    """Parse configuration text; raises ConfigError with a line number."""
    solver_kwargs: dict = {}
    cfg_kwargs: dict = {}
    section = None
    s_line = theorems_line = None
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(line_no, f"malformed section header {raw_line.strip()!r}")
            section = line[1:-1].strip().lower()
            if section not in _SECTIONS:
                raise ConfigError(
                    line_no,
                    f"unknown section [{section}]; known: [solver], [monitor], [output]",
                )
            continue
        if "=" not in line:
            raise ConfigError(line_no, f"expected 'key = value', got {raw_line.strip()!r}")
        if section is None:
            raise ConfigError(line_no, "key outside of any section")
        key, raw_val = (part.strip() for part in line.split("=", 1))
        keys = _SECTIONS[section]
        if key not in keys:
            raise ConfigError(line_no, f"unknown key {key!r} in section [{section}]")
        if section == "solver":
            solver_kwargs[key] = _coerce(raw_val, keys[key], line_no)
        elif section == "monitor":
            if key in ("theorems", "theorem"):
                theorems, overrides = _parse_theorem_list(raw_val, line_no)
                cfg_kwargs["theorems"] = theorems
                cfg_kwargs["s_overrides"] = overrides
                theorems_line = line_no
            elif key == "s":
                cfg_kwargs["s"] = _coerce(raw_val, float, line_no)
                s_line = line_no
            elif key == "constants":
                cfg_kwargs["constants_path"] = raw_val
            else:
                cfg_kwargs[key] = _coerce(raw_val, keys[key], line_no)
        else:
            mapping = {
                "directory": "output_dir",
                "timeseries": "emit_timeseries",
                "reports": "emit_reports",
                "checkpoints": "emit_checkpoints",
            }
            cfg_kwargs[mapping[key]] = _coerce(raw_val, keys[key], line_no)

    try:
        solver = SolverConfig(**solver_kwargs)
    except ValueError as exc:
        raise ConfigError(None, f"invalid solver configuration: {exc}") from exc
    cfg = RunConfig(solver=solver, **cfg_kwargs)
    if not (0 < cfg.epsilon < 1):
        raise ConfigError(s_line, f"epsilon must lie in (0, 1), got {cfg.epsilon:g}")
    _validate_specs(cfg, s_line, theorems_line)
    return cfg


def serialize(cfg: RunConfig) -> str:
    """Canonical text form; parse(serialize(cfg)) == cfg."""
    s = cfg.solver
    theorem_items = []
    overrides = dict(cfg.s_overrides)
    for tid in cfg.theorems:
        if tid in overrides:
            theorem_items.append(f"{tid}:{overrides[tid]:g}")
        else:
            theorem_items.append(tid)
    lines = [
        "[solver]",
        f"n = {s.n}",
        f"viscosity = {s.viscosity:.17g}",
        f"dt = {s.dt:.17g}",
        f"t_end = {s.t_end:.17g}",
        f"dealias = {str(s.dealias).lower()}",
        f"init = {s.init}",
        f"seed = {s.seed}",
        f"amplitude = {s.amplitude:.17g}",
        f"spectral_slope = {s.spectral_slope:.17g}",
        f"sample_stride = {s.sample_stride}",
        "",
        "[monitor]",
        f"theorems = {', '.join(theorem_items)}",
        f"s = {cfg.s:.17g}",
        f"epsilon = {cfg.epsilon:.17g}",
        f"constants = {cfg.constants_path}",
        f"calibration_seed_count = {cfg.calibration_seed_count}",
        f"calibration_n = {cfg.calibration_n}",
        f"calibration_slope = {cfg.calibration_slope:.17g}",
        "",
        "[output]",
        f"directory = {cfg.output_dir}",
        f"timeseries = {str(cfg.emit_timeseries).lower()}",
        f"reports = {str(cfg.emit_reports).lower()}",
        f"checkpoints = {str(cfg.emit_checkpoints).lower()}",
        "",
    ]
    return "\n".join(lines)


DEFAULT_CONFIG_TEXT = serialize(RunConfig())
