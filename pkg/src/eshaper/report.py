"""Deterministic text output of runs, the run manifest, and human-readable summaries.

Every data file is plain text: ``# key: value`` header lines followed by
whitespace-separated numeric rows printed with ``%.17g`` so that values
round-trip exactly.  ``manifest.json`` records the normalised configuration,
grids, diagnostics and the SHA-256 of every file of the run.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .config import dump_json
from .grid import ComplexField, PixelGrid
from .modes import PlasmonBasis
from .bem import DEGENERACY_TOL
from .shaper import _SNAP_TOL, render_incident
from .vibrational import ORTHO_TOL_FILE

__all__ = [
    "ManifestError",
    "write_table",
    "read_table",
    "write_field",
    "read_field",
    "write_run",
    "read_manifest",
    "render_summary",
]

MANIFEST = "manifest.json"
SUMMARY = "summary.txt"
_FMT = "%.17g"


class ManifestError(ValueError):
    """Missing or inconsistent run manifest."""


# ------------------------------------------------------------ tables


def _header_value(v) -> str:
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(v, sort_keys=True, default=float)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_table(path, columns: list[str], rows: np.ndarray, header: dict | None = None) -> None:
    """Write a numeric table with ``# key: value`` headers and a ``# columns:`` line."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.size and rows.shape[1] != len(columns):
        raise ValueError(f"{len(columns)} column names for {rows.shape[1]} columns")
    lines = [f"# {k}: {_header_value(v)}" for k, v in (header or {}).items()]
    lines.append("# columns: " + " ".join(columns))
    lines += [" ".join(_FMT % x for x in r) for r in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def read_table(path) -> tuple[dict, list[str], np.ndarray]:
    """Inverse of :func:`write_table`; header values are returned as strings."""
    header, columns, rows = {}, [], []
    for i, line in enumerate(Path(path).read_text().splitlines(), 1):
        if line.startswith("#"):
            key, _, val = line[1:].partition(":")
            if key.strip() == "columns":
                columns = val.split()
            else:
                header[key.strip()] = val.strip()
        elif line.strip():
            try:
                rows.append([float(x) for x in line.split()])
            except ValueError as exc:
                raise ValueError(f"{path}:{i}: malformed row") from exc
    data = np.array(rows) if rows else np.zeros((0, len(columns)))
    return header, columns, data


def write_field(path, fld: ComplexField, header: dict | None = None) -> None:
    """Pixelated wave function as ``Qx Qy re im`` rows (nm^-1, nm)."""
    g = fld.grid
    meta = {"kind": "field", "pitch_nm^-1": g.pitch, "q_max_nm^-1": g.q_max, "pixels": g.n}
    meta.update(header or {})
    q = g.centers
    rows = np.column_stack([q[:, 0], q[:, 1], fld.values.real, fld.values.imag])
    write_table(path, ["Qx", "Qy", "re", "im"], rows, meta)


def read_field(path) -> ComplexField:
    """Load a field written by :func:`write_field` back onto its pixel grid."""
    header, cols, data = read_table(path)
    if cols[:4] != ["Qx", "Qy", "re", "im"]:
        raise ValueError(f"{path}: not a field file")
    try:
        pitch = float(header["pitch_nm^-1"])
        q_max = float(header["q_max_nm^-1"])
    except KeyError as exc:
        raise ValueError(f"{path}: missing header {exc}") from exc
    index = np.rint(data[:, :2] / pitch).astype(int)
    grid = PixelGrid(q_max=q_max, pitch=pitch, index=index)
    return ComplexField(grid, data[:, 2] + 1j * data[:, 3])


def _write_map(path, x: np.ndarray, values: np.ndarray, header: dict, complex_cols=("re", "abs")) -> None:
    xx, yy = np.meshgrid(x, x)
    v = values.ravel()
    if complex_cols == ("re", "abs"):
        cols = [v.real, np.abs(v)]
    else:
        cols = [v.real, v.imag]
    rows = np.column_stack([xx.ravel(), yy.ravel(), *cols])
    write_table(path, ["x", "y", *complex_cols], rows, header)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ------------------------------------------------------------ run output


def _mode_rows(basis) -> tuple[list[str], np.ndarray, dict]:
    groups = basis.groups()
    gid = np.empty(basis.n_modes, int)
    for k, grp in enumerate(groups):
        gid[grp] = k + 1
    cols = ["index", "omega_eV", "gamma_eV", "weight_eV", "q_long_nm^-1", "group"]
    rows = np.column_stack([np.arange(1, basis.n_modes + 1), basis.omega, basis.gamma,
                            basis.weight, basis.q_long, gid])
    meta = {"kind": basis.kind, "labels": list(basis.labels),
            "groups": [[i + 1 for i in g] for g in groups]}
    return cols, rows, meta


def _profile_maps(run, out: Path, files: list[str]) -> None:
    basis = run.basis
    half = _psi_half(basis)
    n = int(run.config.analysis["realspace_points"])
    x = (np.arange(n) - (n - 1) / 2) * (2 * half / (n - 1))
    xx, yy = np.meshgrid(x, x)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    w = basis.profile(pts)
    for k, label in enumerate(basis.labels):
        name = f"profile_{k + 1}.txt"
        meta = {"kind": "profile", "mode": k + 1, "label": label,
                "omega_eV": float(basis.omega[k])}
        _write_map(out / name, x, w[:, k].reshape(n, n), meta, ("re", "im"))
        files.append(name)


def _psi_half(basis) -> float:
    _, radius = basis.extent()
    return 1.5 * max(radius, 0.2) + (2.0 if isinstance(basis, PlasmonBasis) else 0.1)


def _incident_map(run, out: Path, files: list[str]) -> None:
    alpha = run.alpha
    g = alpha.grid
    per = 2 * math.pi / g.pitch
    n = max(int(run.config.analysis["realspace_points"]),
            int(math.ceil(per * 2 * g.half_width * g.pitch / math.pi)) + 1)
    x = (np.arange(n) - n // 2) * (per / n)
    psi = render_incident(alpha, x)
    meta = {"kind": "incident real-space wave function", "period_nm": per,
            "columns_meaning": "x y Re(psi) |psi|"}
    _write_map(out / "psi_incident.txt", x, psi, meta)
    files.append("psi_incident.txt")


def _describe_target(run) -> dict | None:
    if run.target is None:
        return None
    t = run.config.target
    d = {"kind": t["kind"], "modes": [m + 1 for m in run.target.modes]}
    if run.target_q is not None:
        d["q_nm^-1"] = run.target_q.tolist()
        d["detector_index"] = [run.grids.detector.index[f].tolist() for _, f in run.target.pairs]
    return d


def write_run(run, out_dir) -> dict:
    """Write all outputs of ``run`` into ``out_dir`` and return the manifest dict."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: list[str] = []
    basis = run.basis
    cols, rows, meta = _mode_rows(basis)
    write_table(out / "modes.txt", cols, rows, meta)
    files.append("modes.txt")
    spec = np.column_stack([run.energies, basis.g(run.energies)])
    write_table(out / "spectral_functions.txt",
                ["omega_eV"] + [f"g_{k + 1}" for k in range(basis.n_modes)], spec,
                {"kind": "spectral functions g_n(omega) (1/eV)"})
    files.append("spectral_functions.txt")
    _profile_maps(run, out, files)

    diagnostics: dict = {"sample": run.sample_info}
    manifest = {
        "eshaper_manifest": 1,
        "version": __version__,
        "command": run.command,
        "config": run.config.to_dict(),
        "base_dir": str(Path(run.config.base_dir).resolve()),
        "beam": {"hbar_v_eV_nm": run.beam.hbar_v, "k_nm^-1": run.beam.k,
                 "q_max_i_nm^-1": run.beam.q_max_i, "q_max_f_nm^-1": run.beam.q_max_f},
        "seeds": None,
        "tolerances": {
            "degeneracy_eV": DEGENERACY_TOL,
            "pitch_snap": _SNAP_TOL,
            "orthonormality_file": ORTHO_TOL_FILE,
            "svd_cutoff": run.config.solver["svd_cutoff"],
            "tikhonov": run.config.solver["tikhonov"],
        },
        "modes": {"labels": list(basis.labels), "omega_eV": basis.omega.tolist(),
                  "groups": meta["groups"]},
    }
    if run.grids is not None:
        manifest["grids"] = run.grids.describe()
        manifest["target"] = _describe_target(run)
    if run.inversion is not None:
        diagnostics["inversion"] = run.inversion.diagnostics()
    if run.alpha is not None:
        write_field(out / "alpha_incident.txt", run.alpha,
                    {"norm": run.alpha.norm2(), "command": run.command})
        files.append("alpha_incident.txt")
        _incident_map(run, out, files)
    if run.final is not None:
        for gname, final in (("detector", run.final_coarse), ("fine", run.final)):
            suffix = "" if gname == "detector" else "_fine"
            q = final.grid.centers
            for n in range(final.n_modes):
                name = f"final{suffix}_{n + 1}.txt"
                write_field(out / name, final.field(n),
                            {"mode": n + 1, "label": final.labels[n],
                             "omega_eV": float(final.omega[n]), "grid": gname})
                files.append(name)
                name = f"eels_map{suffix}_{n + 1}.txt"
                write_table(out / name, ["Qx", "Qy", "Gamma"],
                            np.column_stack([q, run.eels_maps[gname][n]]),
                            {"kind": "momentum-resolved loss (nm^2/eV)", "mode": n + 1,
                             "omega_eV": float(final.omega[n]), "grid": gname,
                             "pitch_nm^-1": final.grid.pitch,
                             "method": run.config.analysis["eels_method"]})
                files.append(name)
        rows = np.column_stack([run.energies, run.spectra["aperture"], run.spectra["all"]])
        write_table(out / "spectrum.txt", ["omega_eV", "Gamma_aperture", "Gamma_all"], rows,
                    {"kind": "filtered loss spectrum (1/eV)"})
        files.append("spectrum.txt")
        pops = run.final.probability()
        diagnostics["scattering"] = {
            "incident_norm": run.alpha.norm2(),
            "probability_per_mode": pops.tolist(),
            "probability_total": float(pops.sum()),
            "probability_detector_grid": run.final_coarse.total,
        }
    if run.fractions is not None:
        fm = run.fractions
        rows = np.column_stack([np.arange(1, len(fm.centers) + 1), fm.centers, fm.values])
        write_table(out / "fractions.txt", ["region", "Qx", "Qy", *fm.labels], rows,
                    {"kind": "detection fractions", "normalization": fm.normalization,
                     "radius_nm^-1": fm.radius, "status": fm.status,
                     "modes": list(fm.labels)})
        files.append("fractions.txt")
        diagnostics["fractions"] = {
            "values": fm.values.tolist(), "labels": list(fm.labels), "status": fm.status,
            "diagonal_min": float(np.nanmin(np.diag(fm.values))) if fm.status == "ok" else None,
        }
    manifest["diagnostics"] = diagnostics
    manifest["files"] = {f: _sha256(out / f) for f in sorted(files)}
    (out / MANIFEST).write_text(dump_json(manifest))
    return manifest


def read_manifest(path) -> dict:
    """Load and sanity-check ``manifest.json`` (a run directory or the file itself)."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read manifest {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}:{exc.lineno}: malformed manifest ({exc.msg})") from exc
    if not isinstance(data, dict) or "eshaper_manifest" not in data or "config" not in data:
        raise ManifestError(f"{path}: not an eshaper run manifest")
    return data


def verify_files(run_dir) -> list[str]:
    """Names of run files whose checksum no longer matches the manifest."""
    run_dir = Path(run_dir)
    data = read_manifest(run_dir)
    bad = []
    for name, digest in data.get("files", {}).items():
        p = run_dir / name
        if not p.exists() or _sha256(p) != digest:
            bad.append(name)
    return bad


def _fmt(x) -> str:
    if x is None:
        return "n/a"
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def render_summary(run_dir) -> str:
    """Human-readable report of a finished run directory."""
    run_dir = Path(run_dir)
    m = read_manifest(run_dir)
    bad = verify_files(run_dir)
    out = [f"eshaper run ({m['command']}), version {m['version']}", ""]
    s = m["config"]["sample"]
    out.append(f"sample: {s['kind']}")
    info = m["diagnostics"].get("sample", {})
    for k in ("source", "n_elements", "eig_residual"):
        if k in info:
            out.append(f"  {k}: {_fmt(info[k])}")
    b = m["beam"]
    out.append(f"beam: hbar v = {b['hbar_v_eV_nm']:.6g} eV nm, k = {b['k_nm^-1']:.6g} nm^-1, "
               f"q_max_i = {b['q_max_i_nm^-1']:.6g}, q_max_f = {b['q_max_f_nm^-1']:.6g} nm^-1")
    out += ["", "modes:", "  index  omega (eV)  label"]
    for i, (lab, w) in enumerate(zip(m["modes"]["labels"], m["modes"]["omega_eV"]), 1):
        out.append(f"  {i:5d}  {w:10.5f}  {lab}")
    out.append(f"  degenerate groups: {m['modes']['groups']}")
    if "grids" in m:
        g = m["grids"]
        out += ["", "grids:"]
        for k in ("incident", "detector", "fine"):
            if k in g:
                out.append(f"  {k}: {g[k]['n_pixels']} pixels, pitch {g[k]['pitch']:.6g} nm^-1")
    if m.get("target"):
        out += ["", f"target: {m['target']}"]
    d = m["diagnostics"]
    if "inversion" in d:
        inv = d["inversion"]
        out += ["", "inversion:"]
        for k in sorted(inv):
            out.append(f"  {k}: {_fmt(inv[k])}")
    if "scattering" in d:
        sc = d["scattering"]
        out += ["", "scattering:",
                f"  total probability: {_fmt(sc['probability_total'])}",
                "  per mode: " + ", ".join(f"{p:.4g}" for p in sc["probability_per_mode"])]
    if "fractions" in d:
        fr = d["fractions"]
        out += ["", f"detection fractions ({fr['status']}), rows = regions, columns = modes "
                + " ".join(fr["labels"])]
        for j, row in enumerate(fr["values"], 1):
            out.append(f"  region {j}: " + " ".join(
                "   nan" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:6.3f}"
                for v in row))
    out += ["", f"files ({len(m['files'])}):"]
    out += [f"  {name}" for name in m["files"]]
    out.append("checksums: OK" if not bad else "checksums: MISMATCH in " + ", ".join(bad))
    return "\n".join(out) + "\n"
