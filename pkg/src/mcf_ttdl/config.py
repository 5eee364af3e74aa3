"""Fiber-design and run configuration files (TOML).

Keys carry their unit in the name (``length_km``, ``a1_um`` ...). Validation
collects every violation before failing, and unknown keys are errors so that
a typo never silently falls back to a default.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import tomli
import tomli_w

from .errors import ConfigError, TTDLError
from .fiber_model import (
    ANCHOR_WAVELENGTH,
    DEFAULT_TAU_G0,
    CoreProfile,
    DispersionModel,
    FiberCore,
    McfLink,
    hex7_layout,
    place_cores,
    profile_violations,
)

LINK_KEYS = {
    "length_km", "core_pitch_um", "cladding_diameter_um", "anchor_wavelength_nm",
    "tau_g0_ps_per_km", "layout", "arrangement", "adjacency",
}
CORE_KEYS = {
    "id", "a1_um", "a2_um", "w_um", "delta1_pct", "delta2_pct", "D_ps_per_km_nm",
    "S_ps_per_km_nm2", "n_eff", "r_um", "theta_deg", "tau_g0_ps_per_km",
}
CORE_REQUIRED = ("id", "a1_um", "a2_um", "w_um", "delta1_pct", "D_ps_per_km_nm", "S_ps_per_km_nm2", "n_eff")

RUN_DEFAULTS = {
    "wavelength_nm": 1560.0,
    "wavelengths_nm": [1560.0, 1575.0],
    "freq_max_hz": 20e9,
    "freq_step_hz": 10e6,
    "angle_step_deg": 0.1,
    "element_spacing_m": 0.03,
    "carrier_hz": 5e9,
    "weights": None,
    "bend_radii_mm": [20.0 + 5.0 * k for k in range(97)],
    "bend_orientation_deg": 0.0,
    "twist_turns": 1.0,
    "xtalk_floor_db": -90.0,
    "trials": 1000,
    "radius_halfwidth_um": 0.1,
    "seed": 12345,
    "sensitivity": "linear",
    "sample_wavelengths_nm": [1530.0 + 5.0 * k for k in range(9)],
}
DESIGN_DEFAULTS = {
    "targets_D_ps_per_km_nm": [14.75 + k for k in range(7)],
    "target_tau_g0_ps_per_km": None,
    "a1_bounds_um": [1.5, 6.5],
    "a2_bounds_um": [2.0, 6.0],
    "w_bounds_um": [2.0, 6.0],
    "delta1_bounds_pct": [0.3, 1.0],
    "a2_um": 4.0,
    "w_um": 4.0,
    "delta1_pct": 0.8,
    "delta2_pct": 1.0,
}


def bundled_design_path() -> Path:
    return Path(str(resources.files("mcf_ttdl") / "data" / "table1.toml"))


@dataclass
class RunConfig:
    path: Path
    link: McfLink
    run: dict = field(default_factory=dict)
    design: dict = field(default_factory=dict)


def _num(errors, where, table, key, required=True, default=None, check=None, msg=None):
    if key not in table:
        if required:
            errors.append(f"{where}: missing '{key}'")
        return default
    val = table[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        errors.append(f"{where}: '{key}' must be a finite number (got {val!r})")
        return default
    if check is not None and not check(val):
        errors.append(f"{where}: '{key}' {msg} (got {val})")
        return default
    return float(val)


def parse_design(data: dict, errors: list) -> McfLink | None:
    """Build a link from parsed TOML, appending every problem to ``errors``."""
    for key in set(data) - {"link", "cores", "run", "design"}:
        errors.append(f"unknown top-level key '{key}'")
    link = data.get("link", {})
    if not isinstance(link, dict):
        errors.append("[link] must be a table")
        link = {}
    for key in sorted(set(link) - LINK_KEYS):
        errors.append(f"link: unknown key '{key}'")
    length = _num(errors, "link", link, "length_km", check=lambda v: v > 0, msg="must be > 0")
    pitch = _num(errors, "link", link, "core_pitch_um", check=lambda v: v > 0, msg="must be > 0")
    clad = _num(errors, "link", link, "cladding_diameter_um", required=False, default=125.0,
                check=lambda v: v > 0, msg="must be > 0")
    lam0 = _num(errors, "link", link, "anchor_wavelength_nm", required=False,
                default=ANCHOR_WAVELENGTH, check=lambda v: v > 0, msg="must be > 0")
    tau0 = _num(errors, "link", link, "tau_g0_ps_per_km", required=False, default=DEFAULT_TAU_G0)
    layout = link.get("layout", "hex7")
    if layout not in ("hex7", "explicit"):
        errors.append(f"link: 'layout' must be 'hex7' or 'explicit' (got {layout!r})")

    raw_cores = data.get("cores", [])
    if not isinstance(raw_cores, list) or not raw_cores:
        errors.append("at least one [[cores]] entry is required")
        raw_cores = []
    cores = []
    for i, c in enumerate(raw_cores):
        where = f"core {c.get('id', f'#{i + 1}')}"
        for key in sorted(set(c) - CORE_KEYS):
            errors.append(f"{where}: unknown key '{key}'")
        missing = [k for k in CORE_REQUIRED if k not in c]
        for k in missing:
            errors.append(f"{where}: missing '{k}'")
        cid = c.get("id")
        if cid is not None and (isinstance(cid, bool) or not isinstance(cid, int) or cid < 1):
            errors.append(f"{where}: 'id' must be a positive integer")
        vals = {}
        for key in CORE_KEYS - {"id"}:
            if key in c:
                vals[key] = _num(errors, where, c, key)
        geo = dict(a1=vals.get("a1_um"), a2=vals.get("a2_um"), w=vals.get("w_um"),
                   delta1=vals.get("delta1_pct"), delta2=vals.get("delta2_pct", 1.0))
        if all(v is not None for v in geo.values()):
            for problem in profile_violations(type("P", (), geo)):
                name = problem.split()[0]
                unit = {"a1": "a1_um", "a2": "a2_um", "w": "w_um",
                        "delta1": "delta1_pct", "delta2": "delta2_pct"}[name]
                errors.append(f"{where}: '{unit}' {problem.split(' ', 1)[1]}")
        n_eff = vals.get("n_eff")
        if n_eff is not None and not 1.0 < n_eff < 2.0:
            errors.append(f"{where}: 'n_eff' must lie in (1, 2) (got {n_eff})")
        if vals.get("r_um") is not None and vals["r_um"] < 0:
            errors.append(f"{where}: 'r_um' must be >= 0")
        if layout == "explicit" and ("r_um" not in c or "theta_deg" not in c):
            errors.append(f"{where}: explicit layout needs 'r_um' and 'theta_deg'")
        cores.append((cid, geo, vals))

    ids = [cid for cid, _, _ in cores]
    if len(set(ids)) != len(ids):
        errors.append("core ids must be unique")

    adjacency = link.get("adjacency")
    arrangement = link.get("arrangement", "optimized")
    if layout == "hex7":
        if raw_cores and len(raw_cores) != 7:
            errors.append(f"link: layout 'hex7' needs 7 cores (got {len(raw_cores)})")
        if adjacency is not None:
            errors.append("link: 'adjacency' is implied by layout 'hex7'; use layout 'explicit'")
        if arrangement != "optimized" and (
            not isinstance(arrangement, list) or sorted(arrangement) != sorted(i for i in ids if i is not None)
        ):
            errors.append("link: 'arrangement' must be 'optimized' or a permutation of the core ids")
    elif layout == "explicit":
        if not isinstance(adjacency, list) or not all(
            isinstance(p, list) and len(p) == 2 for p in adjacency
        ):
            errors.append("link: explicit layout needs 'adjacency' as a list of [id, id] pairs")
        else:
            for a, b in adjacency:
                if a == b:
                    errors.append(f"link: adjacency pair [{a}, {b}] is a self-pair")
                elif a not in ids or b not in ids:
                    errors.append(f"link: adjacency pair [{a}, {b}] names an unknown core")

    if errors:
        return None

    built = []
    for cid, geo, vals in cores:
        model = DispersionModel(
            anchor_wavelength=lam0,
            tau_g0=vals.get("tau_g0_ps_per_km", tau0),
            dispersion=vals["D_ps_per_km_nm"],
            slope=vals["S_ps_per_km_nm2"],
        )
        built.append(FiberCore(
            id=cid, profile=CoreProfile(**geo), model=model, n_eff=vals["n_eff"],
            r=vals.get("r_um", 0.0), theta=math.radians(vals.get("theta_deg", 0.0)),
        ))
    kwargs = dict(length=length, core_pitch=pitch, cladding_diameter=clad)
    try:
        if layout == "explicit":
            return McfLink(cores=tuple(built), adjacency=tuple(tuple(p) for p in adjacency), **kwargs)
        from .bend_twist import optimize_arrangement

        positions, slot_adj = hex7_layout(pitch)
        if arrangement == "optimized":
            arrangement, _ = optimize_arrangement(built, slot_adj, pitch=pitch)
        return place_cores(built, arrangement, positions, slot_adj, **kwargs)
    except TTDLError as exc:
        errors.append(str(exc))
        return None


def _read_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: not valid TOML ({exc})") from exc


def load_design(path) -> McfLink:
    errors = []
    link = parse_design(_read_toml(path), errors)
    if errors:
        raise ConfigError(errors)
    return link


def _section(errors, data, name, defaults):
    sec = data.get(name, {})
    if not isinstance(sec, dict):
        errors.append(f"[{name}] must be a table")
        return dict(defaults)
    for key in sorted(set(sec) - set(defaults)):
        errors.append(f"{name}: unknown key '{key}'")
    out = dict(defaults)
    out.update({k: v for k, v in sec.items() if k in defaults})
    return out


def _check_run(errors, run):
    def positive(key):
        v = run[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
            errors.append(f"run: '{key}' must be > 0 (got {v!r})")

    for key in ("freq_max_hz", "freq_step_hz", "angle_step_deg", "element_spacing_m",
                "carrier_hz", "twist_turns", "trials"):
        positive(key)
    hw = run["radius_halfwidth_um"]
    if isinstance(hw, bool) or not isinstance(hw, (int, float)) or hw < 0:
        errors.append(f"run: 'radius_halfwidth_um' must be >= 0 (got {hw!r})")
    if not isinstance(run["seed"], int) or isinstance(run["seed"], bool):
        errors.append("run: 'seed' must be an integer")
    if not isinstance(run["trials"], int):
        errors.append("run: 'trials' must be an integer")
    if run["sensitivity"] not in ("linear", "resolve"):
        errors.append("run: 'sensitivity' must be 'linear' or 'resolve'")
    for key in ("wavelengths_nm", "sample_wavelengths_nm"):
        for lam in run[key]:
            if not 1500 <= lam <= 1600:
                errors.append(f"run: '{key}' entry {lam} outside 1500-1600 nm")
    if not 1500 <= run["wavelength_nm"] <= 1600:
        errors.append(f"run: 'wavelength_nm' {run['wavelength_nm']} outside 1500-1600 nm")
    radii = run["bend_radii_mm"]
    if any(r <= 0 for r in radii) or list(radii) != sorted(radii):
        errors.append("run: 'bend_radii_mm' must be positive and ascending")


def validate_config(path) -> RunConfig:
    """Parse and check a config file, reporting all violations at once."""
    path = Path(path)
    data = _read_toml(path)
    errors: list[str] = []
    link = parse_design(data, errors)
    run = _section(errors, data, "run", RUN_DEFAULTS)
    design = _section(errors, data, "design", DESIGN_DEFAULTS)
    if not any("run:" in e for e in errors):
        _check_run(errors, run)
    if errors:
        raise ConfigError(errors)
    return RunConfig(path=path, link=link, run=run, design=design)


def design_to_toml(link: McfLink, tau_g0: float | None = None, explicit_positions: bool = True) -> str:
    """Serialize ``link`` in the same format :func:`load_design` reads."""
    lam0 = link.cores[0].model.anchor_wavelength
    tau0 = tau_g0 if tau_g0 is not None else link.cores[0].model.tau_g0
    doc = {
        "link": {
            "length_km": link.length,
            "core_pitch_um": link.core_pitch,
            "cladding_diameter_um": link.cladding_diameter,
            "anchor_wavelength_nm": lam0,
            "tau_g0_ps_per_km": tau0,
        },
        "cores": [],
    }
    if explicit_positions:
        doc["link"]["layout"] = "explicit"
        doc["link"]["adjacency"] = [list(p) for p in link.adjacency]
    for c in link.cores:
        entry = {
            "id": c.id,
            "a1_um": c.profile.a1,
            "a2_um": c.profile.a2,
            "w_um": c.profile.w,
            "delta1_pct": c.profile.delta1,
            "delta2_pct": c.profile.delta2,
            "D_ps_per_km_nm": c.model.dispersion,
            "S_ps_per_km_nm2": c.model.slope,
            "n_eff": c.n_eff,
        }
        if c.model.tau_g0 != tau0:
            entry["tau_g0_ps_per_km"] = c.model.tau_g0
        if explicit_positions:
            entry["r_um"] = c.r
            entry["theta_deg"] = math.degrees(c.theta)
        doc["cores"].append(entry)
    return tomli_w.dumps(doc)


def atomic_write(path, text: str | bytes):
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    mode = "wb" if isinstance(text, bytes) else "w"
    with open(tmp, mode, **({} if isinstance(text, bytes) else {"newline": ""})) as fh:
        fh.write(text)
    os.replace(tmp, path)
