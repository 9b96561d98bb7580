"""Run configuration: parsing, validation and construction of pipeline objects.

A run is described by one YAML (or JSON) document with the sections
``sample``, ``beam``, ``target``, ``solver``, ``analysis`` and ``output``.
A run manifest written by :mod:`eshaper.report` embeds the complete,
normalised configuration and can be passed wherever a config is expected.
"""

from __future__ import annotations

import copy
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .units import ParameterError

__all__ = ["ConfigError", "RunConfig", "load_config", "DEFAULTS"]


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


DEFAULTS: dict[str, dict[str, Any]] = {
    "sample": {
        "kind": "triangle",
        "side_nm": 10.0,
        "thickness_nm": 2.0,
        "corner_rounding_nm": 0.5,
        "elements": 1500,
        "radius_nm": 5.0,
        "mesh_path": None,
        "vibrational_path": None,
        "surrogate": None,
        "charge_model": "point",
        "n_modes": 5,
        "bright_only": True,
        "drude": {"eps_b": 4.0, "omega_p_eV": 9.17, "gamma_eV": 0.021},
    },
    "beam": {
        "kinetic_energy_eV": 100e3,
        "phi_i_mrad": 1.5,
        "phi_f_mrad": 0.75,
        "incident_pixels": 1257,
        "detector_pixels": 49,
        "relativistic_k": True,
        "fine_factor": None,
    },
    "target": None,
    "solver": {
        "svd_cutoff": 1e-8,
        "tikhonov": 0.0,
        "transfer": "analytic",
        "forward": "direct",
    },
    "analysis": {
        "region_radius_pitch": 1.0,
        "regions": None,
        "normalization": "region",
        "energy_window_eV": None,
        "n_energies": 401,
        "eels_method": "momentum",
        "realspace_points": 128,
    },
    "output": {"dir": "run"},
}

class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent floats without a dot (``1e-8``)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
                |[-+]?\.(?:inf|Inf|INF)
                |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)

_SAMPLE_KINDS = ("triangle", "sphere", "mesh", "vibrational")


def _merge(defaults: dict, given: dict, where: str) -> dict:
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        if key not in defaults:
            raise ConfigError(f"unknown key '{where}.{key}'")
        if isinstance(defaults[key], dict) and isinstance(val, dict):
            out[key] = _merge(defaults[key], val, f"{where}.{key}")
        else:
            out[key] = val
    return out


def _positive(d: dict, key: str, where: str) -> None:
    v = d.get(key)
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v) or v <= 0:
        raise ConfigError(f"'{where}.{key}' must be a positive number, got {v!r}")


@dataclass(frozen=True)
class RunConfig:
    """Normalised run configuration (all sections filled with defaults)."""

    sample: dict
    beam: dict
    target: dict | None
    solver: dict
    analysis: dict
    output: dict
    base_dir: str = "."

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | Path = ".") -> RunConfig:
        if not isinstance(data, dict) or not data:
            raise ConfigError("configuration is empty")
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
        if "sample" not in data:
            raise ConfigError("missing 'sample' section")
        sec = {}
        for name, dflt in DEFAULTS.items():
            given = data.get(name)
            if dflt is None:
                sec[name] = copy.deepcopy(given)
            elif given is None:
                sec[name] = copy.deepcopy(dflt)
            elif not isinstance(given, dict):
                raise ConfigError(f"section '{name}' must be a mapping")
            else:
                sec[name] = _merge(dflt, given, name)
        cfg = cls(**sec, base_dir=str(base_dir))
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {k: copy.deepcopy(getattr(self, k)) for k in DEFAULTS}

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    # ------------------------------------------------------------ checks
    def validate(self) -> None:
        s = self.sample
        if s["kind"] not in _SAMPLE_KINDS:
            raise ConfigError(f"sample.kind must be one of {_SAMPLE_KINDS}, got {s['kind']!r}")
        sources = [s["kind"] in ("triangle", "sphere"), s["mesh_path"] is not None,
                   s["vibrational_path"] is not None or s["surrogate"] is not None]
        if sum(bool(x) for x in sources) != 1:
            raise ConfigError("exactly one sample source is required (geometry, mesh_path, "
                              "or vibrational_path/surrogate)")
        if s["kind"] == "mesh" and s["mesh_path"] is None:
            raise ConfigError("sample.kind 'mesh' needs sample.mesh_path")
        if s["kind"] == "vibrational":
            if (s["vibrational_path"] is None) == (s["surrogate"] is None):
                raise ConfigError("vibrational sample needs exactly one of vibrational_path, surrogate")
            if s["surrogate"] is not None and not isinstance(s["surrogate"], dict):
                raise ConfigError("sample.surrogate must be a mapping of surrogate parameters")
        elif s["mesh_path"] is not None and s["kind"] != "mesh":
            raise ConfigError("sample.mesh_path requires sample.kind 'mesh'")
        if s["kind"] == "triangle":
            for k in ("side_nm", "thickness_nm"):
                _positive(s, k, "sample")
            if not 0 <= s["corner_rounding_nm"] < s["side_nm"] / 4:
                raise ConfigError("sample.corner_rounding_nm must lie in [0, side/4)")
        if s["kind"] == "sphere":
            _positive(s, "radius_nm", "sample")
        if s["charge_model"] not in ("point", "grid"):
            raise ConfigError("sample.charge_model must be 'point' or 'grid'")
        if not isinstance(s["n_modes"], int) or s["n_modes"] < 1:
            raise ConfigError("sample.n_modes must be a positive integer")
        if not isinstance(s["elements"], int) or s["elements"] < 20:
            raise ConfigError("sample.elements must be an integer >= 20")
        for k in ("eps_b", "omega_p_eV", "gamma_eV"):
            _positive(s["drude"], k, "sample.drude")

        b = self.beam
        for k in ("kinetic_energy_eV", "phi_i_mrad", "phi_f_mrad"):
            _positive(b, k, "beam")
        for k in ("incident_pixels", "detector_pixels"):
            if not isinstance(b[k], int) or b[k] < 1:
                raise ConfigError(f"beam.{k} must be a positive integer")
        if b["fine_factor"] is not None and (not isinstance(b["fine_factor"], int) or b["fine_factor"] < 1):
            raise ConfigError("beam.fine_factor must be a positive integer or null")

        v = self.solver
        _positive(v, "svd_cutoff", "solver")
        if not isinstance(v["tikhonov"], (int, float)) or v["tikhonov"] < 0:
            raise ConfigError("solver.tikhonov must be >= 0")
        if v["transfer"] not in ("analytic", "fourier"):
            raise ConfigError("solver.transfer must be 'analytic' or 'fourier'")
        if v["forward"] not in ("direct", "fft"):
            raise ConfigError("solver.forward must be 'direct' or 'fft'")

        a = self.analysis
        _positive(a, "region_radius_pitch", "analysis")
        if a["normalization"] not in ("region", "global"):
            raise ConfigError("analysis.normalization must be 'region' or 'global'")
        if a["eels_method"] not in ("momentum", "realspace"):
            raise ConfigError("analysis.eels_method must be 'momentum' or 'realspace'")
        win = a["energy_window_eV"]
        if win is not None and (len(win) != 2 or not 0 < win[0] < win[1]):
            raise ConfigError("analysis.energy_window_eV must be [lo, hi] with 0 < lo < hi")
        if not isinstance(a["n_energies"], int) or a["n_energies"] < 2:
            raise ConfigError("analysis.n_energies must be an integer >= 2")
        if a["regions"] is not None:
            for r in a["regions"]:
                if len(r) != 2:
                    raise ConfigError("analysis.regions entries must be [qx, qy] in nm^-1")

        t = self.target
        if t is not None:
            self._validate_target(t)

    def _validate_target(self, t: dict) -> None:
        if not isinstance(t, dict):
            raise ConfigError("target must be a mapping")
        kind = t.get("kind")
        extra = set(t) - {"kind", "modes", "pairs", "amplitude"}
        if extra:
            raise ConfigError(f"unknown target key(s): {', '.join(sorted(extra))}")
        n_modes = self.sample["n_modes"]
        if kind == "select":
            modes = t.get("modes")
            if not modes or not all(isinstance(m, int) for m in modes):
                raise ConfigError("target.modes must list 1-based mode indices")
            for m in modes:
                if not 1 <= m <= n_modes:
                    raise ConfigError(f"target mode {m} outside 1..{n_modes}")
        elif kind == "entangle":
            pairs = t.get("pairs")
            if not pairs:
                raise ConfigError("target.pairs must list {mode, pixel|q} entries")
            for p in pairs:
                if not isinstance(p, dict) or "mode" not in p or (("pixel" in p) == ("q" in p)):
                    raise ConfigError("each target pair needs 'mode' and one of 'pixel' [ix, iy] or 'q' [qx, qy]")
                if not 1 <= int(p["mode"]) <= n_modes:
                    raise ConfigError(f"target mode {p['mode']} outside 1..{n_modes}")
        else:
            raise ConfigError("target.kind must be 'select' or 'entangle'")


def load_config(path) -> RunConfig:
    """Read a YAML/JSON run config, or the configuration embedded in a run manifest."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"{path}: YAML parse error{where}: {exc}") from exc
    if isinstance(data, dict) and "config" in data and "eshaper_manifest" in data:
        base = data.get("base_dir", str(path.parent))
        return RunConfig.from_dict(data["config"], base_dir=base)
    try:
        return RunConfig.from_dict(data, base_dir=path.parent)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc


def dump_json(obj) -> str:
    """Deterministic JSON used for manifests."""
    return json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n"
