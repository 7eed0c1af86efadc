"""Sweep configuration, figure presets, and result persistence.

A sweep is described by a single JSON document; :func:`validate_config`
applies defaults, checks bounds, and returns both the normalized document
(which round-trips through the loader) and the executable sweep spec.
Result files embed the resolved configuration and its SHA-256 digest, so
every output is self-describing, and all float formatting is shortest
round-trip, so reruns with the same seed are byte-identical regardless of
the parallelism degree.

Presets mirror the simulation figures; each carries a full-size ``paper``
profile and a desk-scale ``ci`` profile.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .aht import magnus_series, term_magnitudes
from .control import SweepRow, SweepSpec, ensemble_fidelity, nth_order_fidelity
from .operators import frobenius_magnitude
from .sequences import BUILTIN_NAMES, builtin
from .spins import (
    DEFAULT_COUPLING_SIGMA_HZ,
    SpinSystem,
    dipolar_hamiltonian,
    sample_couplings,
)

__all__ = [
    "ConfigError",
    "NormalizedConfig",
    "validate_config",
    "config_digest",
    "run_sweep",
    "sweep_rows_to_csv",
    "sweep_rows_to_json",
    "write_output",
    "PRESET_NAMES",
    "run_preset",
]

# Config-document field names for sweepable parameters -> SweepSpec fields.
_PARAMETER_MAP = {
    "tau_s": "tau",
    "pulse_width_s": "pulse_width",
    "disorder_sigma_hz": "disorder_sigma_hz",
    "global_offset_hz": "global_offset_hz",
    "rotation_error": "rotation_error",
    "transient": "transient",
}
_PARAMETER_UNMAP = {v: k for k, v in _PARAMETER_MAP.items()}

_CONFIG_DEFAULTS = {
    "sequences": list(BUILTIN_NAMES),
    "n_spins": 8,
    "n_coupling_sets": 16,
    "coupling_sigma_hz": DEFAULT_COUPLING_SIGMA_HZ,
    "n_disorder_samples": 1,
    "disorder_sigma_hz": 0.0,
    "global_offset_hz": 0.0,
    "tau_s": 4e-6,
    "pulse_width_s": 0.0,
    "rotation_error": 0.0,
    "transient": 0.0,
    "sweep": {"parameter": "tau_s", "grid": [2e-6, 4e-6, 8e-6]},
    "base_seed": 2026,
}

CSV_COLUMNS = ("sweep_param", "value", "sequence", "mean_infidelity", "stddev", "n_samples")


class ConfigError(ValueError):
    """Aggregated configuration problems, one human-readable line each."""

    def __init__(self, errors: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(errors))
        self.errors = errors


@dataclass(frozen=True)
class NormalizedConfig:
    """A validated configuration: canonical document plus executable spec."""

    document: dict
    spec: SweepSpec


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def validate_config(doc: dict | None) -> NormalizedConfig:
    """Apply defaults and validate a sweep-config document.

    Raises :class:`ConfigError` carrying every detected problem.  The
    returned document re-validates to an identical config (round-trip).
    """
    errors: list[str] = []
    doc = dict(doc or {})
    unknown = set(doc) - set(_CONFIG_DEFAULTS)
    if unknown:
        errors.append(f"unknown fields: {', '.join(sorted(unknown))}")
    merged = {**_CONFIG_DEFAULTS, **{k: v for k, v in doc.items() if k in _CONFIG_DEFAULTS}}

    sequences = [str(s).upper() for s in merged["sequences"]]
    bad = [s for s in sequences if s not in BUILTIN_NAMES]
    if bad:
        errors.append(f"unknown sequences: {', '.join(bad)}")
    if not sequences:
        errors.append("sequences list is empty")

    n_spins = merged["n_spins"]
    if not isinstance(n_spins, int) or not 2 <= n_spins <= 10:
        errors.append(f"n_spins must be an integer in 2..10, got {n_spins!r}")
    for key in ("n_coupling_sets", "n_disorder_samples"):
        if not isinstance(merged[key], int) or merged[key] < 1:
            errors.append(f"{key} must be a positive integer, got {merged[key]!r}")
    if not merged["coupling_sigma_hz"] > 0:
        errors.append("coupling_sigma_hz must be positive")
    if merged["disorder_sigma_hz"] < 0:
        errors.append("disorder_sigma_hz must be nonnegative")
    if not merged["tau_s"] > 0:
        errors.append("tau_s must be positive")
    if merged["pulse_width_s"] < 0:
        errors.append("pulse_width_s must be nonnegative")
    if not isinstance(merged["base_seed"], int) or merged["base_seed"] < 0:
        errors.append(f"base_seed must be a nonnegative integer, got {merged['base_seed']!r}")

    sweep = merged["sweep"]
    parameter, grid = None, []
    if not isinstance(sweep, dict) or set(sweep) - {"parameter", "grid"}:
        errors.append("sweep must be an object with fields 'parameter' and 'grid'")
    else:
        parameter = sweep.get("parameter")
        if parameter not in _PARAMETER_MAP:
            errors.append(
                f"sweep.parameter must be one of {sorted(_PARAMETER_MAP)}, got {parameter!r}"
            )
        raw_grid = sweep.get("grid", [])
        try:
            grid = [float(v) for v in raw_grid]
        except (TypeError, ValueError):
            errors.append("sweep.grid must be a list of numbers")
            grid = []
        if not grid:
            errors.append("sweep.grid is empty")
        elif any(not np.isfinite(v) for v in grid):
            errors.append("sweep.grid contains non-finite values")
        elif any(b <= a for a, b in zip(grid, grid[1:])):
            errors.append("sweep.grid must be strictly increasing")
        elif parameter == "tau_s" and grid[0] <= 0:
            errors.append("tau_s grid values must be positive")
        elif parameter in ("pulse_width_s", "disorder_sigma_hz", "transient") and grid[0] < 0:
            errors.append(f"{parameter} grid values must be nonnegative")

    if errors:
        raise ConfigError(errors)

    document = {
        "sequences": sequences,
        "n_spins": n_spins,
        "n_coupling_sets": merged["n_coupling_sets"],
        "coupling_sigma_hz": float(merged["coupling_sigma_hz"]),
        "n_disorder_samples": merged["n_disorder_samples"],
        "disorder_sigma_hz": float(merged["disorder_sigma_hz"]),
        "global_offset_hz": float(merged["global_offset_hz"]),
        "tau_s": float(merged["tau_s"]),
        "pulse_width_s": float(merged["pulse_width_s"]),
        "rotation_error": float(merged["rotation_error"]),
        "transient": float(merged["transient"]),
        "sweep": {"parameter": parameter, "grid": grid},
        "base_seed": merged["base_seed"],
    }
    spec = SweepSpec(
        parameter=_PARAMETER_MAP[parameter],
        grid=tuple(grid),
        sequences=tuple(sequences),
        n_spins=n_spins,
        n_coupling_sets=document["n_coupling_sets"],
        coupling_sigma_hz=document["coupling_sigma_hz"],
        n_disorder_samples=document["n_disorder_samples"],
        disorder_sigma_hz=document["disorder_sigma_hz"],
        global_offset_hz=document["global_offset_hz"],
        tau=document["tau_s"],
        pulse_width=document["pulse_width_s"],
        rotation_error=document["rotation_error"],
        transient=document["transient"],
        base_seed=document["base_seed"],
    )
    return NormalizedConfig(document=document, spec=spec)


def config_digest(document: dict) -> str:
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def run_sweep(config: NormalizedConfig, threads: int | None = None) -> list[SweepRow]:
    return ensemble_fidelity(config.spec, threads=threads)


def sweep_rows_to_csv(config: NormalizedConfig, rows: list[SweepRow]) -> str:
    """Render sweep rows as CSV with the resolved config embedded in comments."""
    lines = [
        "# spinweave sweep result",
        "# config: " + json.dumps(config.document, sort_keys=True, separators=(",", ":")),
        "# config_sha256: " + config_digest(config.document),
        ",".join(CSV_COLUMNS),
    ]
    for r in rows:
        lines.append(
            ",".join(
                (
                    _PARAMETER_UNMAP[r.parameter],
                    _fmt(r.value),
                    r.sequence,
                    _fmt(r.mean_infidelity),
                    _fmt(r.stddev),
                    str(r.n_samples),
                )
            )
        )
    return "\n".join(lines) + "\n"


def sweep_rows_to_json(config: NormalizedConfig, rows: list[SweepRow]) -> dict:
    return {
        "config": config.document,
        "config_sha256": config_digest(config.document),
        "columns": list(CSV_COLUMNS),
        "rows": [
            [
                _PARAMETER_UNMAP[r.parameter],
                r.value,
                r.sequence,
                r.mean_infidelity,
                r.stddev,
                r.n_samples,
            ]
            for r in rows
        ],
    }


def write_output(path: str | Path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write result file {path}: {exc}") from exc
    return path


def _geomgrid(lo: float, hi: float, n: int) -> list[float]:
    return [float(v) for v in np.geomspace(lo, hi, n)]


def _sweep_preset(name: str, profile: str) -> dict:
    paper = profile == "paper"
    spins = 8 if paper else 4
    sets = 16 if paper else 8
    base: dict = {"n_spins": spins, "n_coupling_sets": sets, "base_seed": 2026}
    if name == "fig2a":
        base["sweep"] = {
            "parameter": "tau_s",
            "grid": _geomgrid(1e-6, 4e-5, 10 if paper else 8),
        }
    elif name == "fig2b":
        base["tau_s"] = 4e-6
        base["sweep"] = {"parameter": "pulse_width_s", "grid": _geomgrid(1e-7, 3e-6, 8)}
    elif name in ("fig6a", "fig6b"):
        base["n_coupling_sets"] = 1
        base["n_disorder_samples"] = 100 if paper else 20
        base["tau_s"] = 4e-6
        if name == "fig6b":
            base["pulse_width_s"] = 1e-6
        base["sweep"] = {
            "parameter": "disorder_sigma_hz",
            "grid": _geomgrid(0.5, 5000.0, 9 if paper else 7),
        }
    elif name == "figA2":
        base["tau_s"] = 4e-6
        base["sweep"] = {
            "parameter": "global_offset_hz",
            "grid": _geomgrid(0.5, 5000.0, 9 if paper else 7),
        }
    elif name == "fig8a":
        base["tau_s"] = 4e-6
        base["pulse_width_s"] = 1e-6
        base["sweep"] = {"parameter": "rotation_error", "grid": _geomgrid(1e-3, 0.2, 8)}
    elif name == "fig8b":
        base["tau_s"] = 4e-6
        base["pulse_width_s"] = 1e-6
        base["sweep"] = {"parameter": "transient", "grid": _geomgrid(1e-3, 0.2, 8)}
    else:
        raise ValueError(f"unknown sweep preset {name!r}")
    return base


def _magnitude_report(system_dipolar, system_offset, system_full, seq, tau, h_dip):
    """Dipolar orders 0-4, offset orders 0-1, and the order-1 cross term."""
    dip = magnus_series(system_dipolar, seq, tau, 4, order_cap=8)
    off = magnus_series(system_offset, seq, tau, 1, order_cap=8)
    full = magnus_series(system_full, seq, tau, 1, order_cap=8)
    scale = frobenius_magnitude(h_dip)
    rows = []
    for order, mag in enumerate(term_magnitudes(dip, h_dip)):
        rows.append({"sequence": seq.name, "term": "dipolar", "order": order, "magnitude": mag})
    for order, mag in enumerate(term_magnitudes(off, h_dip)):
        rows.append({"sequence": seq.name, "term": "offset", "order": order, "magnitude": mag})
    cross = full.terms[1] - dip.terms[1] - off.terms[1]
    rows.append(
        {
            "sequence": seq.name,
            "term": "cross",
            "order": 1,
            "magnitude": frobenius_magnitude(cross) / scale,
        }
    )
    return rows


def _run_figA3(profile: str, outdir: Path, threads=None) -> list[Path]:
    # Coupling scale 420 Hz and offset 30 Hz; tau only sets the overall
    # tau**n weighting of each order, not which terms vanish.
    tau = 4e-6
    seed = 2026
    couplings = sample_couplings(seed, 4, 420.0 / 3.0)
    sys_dip = SpinSystem.create(couplings)
    sys_off = SpinSystem.create(np.zeros((4, 4)), global_offset_hz=30.0)
    sys_full = SpinSystem.create(couplings, global_offset_hz=30.0)
    h_dip = dipolar_hamiltonian(sys_dip)
    rows = []
    for name in BUILTIN_NAMES:
        rows.extend(
            _magnitude_report(sys_dip, sys_off, sys_full, builtin(name), tau, h_dip)
        )
    document = {
        "preset": "figA3",
        "profile": profile,
        "n_spins": 4,
        "coupling_sigma_hz": 420.0 / 3.0,
        "global_offset_hz": 30.0,
        "tau_s": tau,
        "base_seed": seed,
    }
    payload = {
        "config": document,
        "config_sha256": config_digest(document),
        "rows": rows,
    }
    return [write_output(outdir / "figA3.json", json.dumps(payload, indent=2) + "\n")]


def _run_figA4(profile: str, outdir: Path, threads=None) -> list[Path]:
    paper = profile == "paper"
    seed = 2026
    rows = []
    # panels (a)/(b): n-th order fidelity vs tau for representative orders
    panel_specs = [
        ("a", "WHH", 6 if paper else 4, (0, 2, 4)),
        ("b", "BR24", 4, (0, 4, 6)),
    ]
    taus = _geomgrid(2e-6, 2e-5, 6 if paper else 4)
    for panel, seq_name, n_spins, orders in panel_specs:
        seq = builtin(seq_name)
        system = SpinSystem.create(sample_couplings(seed, n_spins, DEFAULT_COUPLING_SIGMA_HZ))
        for tau in taus:
            series = magnus_series(system, seq, tau, max(orders), order_cap=8)
            for order in orders:
                rows.append(
                    {
                        "panel": panel,
                        "sequence": seq_name,
                        "tau_s": tau,
                        "order": order,
                        "fidelity": nth_order_fidelity(system, seq, tau, order, series=series),
                    }
                )
    # panel (c): WHH F_n vs n at |H| tau = 0.466 with uniform 5 kHz couplings,
    # |H| measured as the RMS eigenvalue (Frobenius / sqrt(dim))
    system = SpinSystem.create(5000.0 * (np.ones((4, 4)) - np.eye(4)))
    h = dipolar_hamiltonian(system)
    tau_c = 0.466 / (frobenius_magnitude(h) / np.sqrt(h.shape[0]))
    n_max = 70 if paper else 16
    seq = builtin("WHH")
    series = magnus_series(system, seq, tau_c, n_max, order_cap=72)
    for order in range(n_max + 1):
        rows.append(
            {
                "panel": "c",
                "sequence": "WHH",
                "tau_s": tau_c,
                "order": order,
                "fidelity": nth_order_fidelity(system, seq, tau_c, order, series=series),
            }
        )
    document = {"preset": "figA4", "profile": profile, "base_seed": seed, "max_order": n_max}
    payload = {"config": document, "config_sha256": config_digest(document), "rows": rows}
    return [write_output(outdir / "figA4.json", json.dumps(payload, indent=2) + "\n")]


_SWEEP_PRESETS = ("fig2a", "fig2b", "fig6a", "fig6b", "figA2", "fig8a", "fig8b")
PRESET_NAMES = _SWEEP_PRESETS + ("figA3", "figA4")


def run_preset(
    name: str, profile: str = "ci", outdir: str | Path = ".", threads: int | None = None
) -> list[Path]:
    """Run a figure preset and write its result files into ``outdir``."""
    if profile not in ("paper", "ci"):
        raise ConfigError([f"profile must be 'paper' or 'ci', got {profile!r}"])
    outdir = Path(outdir)
    if name in _SWEEP_PRESETS:
        config = validate_config(_sweep_preset(name, profile))
        rows = run_sweep(config, threads=threads)
        path = write_output(outdir / f"{name}.csv", sweep_rows_to_csv(config, rows))
        return [path]
    if name == "figA3":
        return _run_figA3(profile, outdir, threads)
    if name == "figA4":
        return _run_figA4(profile, outdir, threads)
    raise ConfigError([f"unknown preset {name!r}; known: {', '.join(PRESET_NAMES)}"])
