"""Command-line interface.

Subcommands: ``sweep``, ``seq lint``, ``aht terms``, ``exp autocorr``,
``exp mqc``, ``preset``.  Exit codes: 0 on success, 2 on configuration
errors, 3 on numerical-diagnostic failures (e.g. a propagator that fails
its unitarity check).  ``SPINWEAVE_THREADS`` overrides the parallelism
degree; parallelism never changes numerical results.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .aht import magnus_series, term_magnitudes
from .control import ErrorModel, NumericalDiagnosticError
from .experiments import (
    FreeWindow,
    ProtectedWindow,
    autocorrelation,
    c_avg,
    fit_decay,
    mqc_experiment,
)
from .harness import (
    ConfigError,
    PRESET_NAMES,
    config_digest,
    run_preset,
    run_sweep,
    sweep_rows_to_csv,
    sweep_rows_to_json,
    validate_config,
    write_output,
)
from .operators import frobenius_magnitude
from .sequences import (
    BUILTIN_NAMES,
    ascii_frame,
    builtin,
    frame_matrix,
    parse_sequence,
    row_sum_check,
    validate_cyclic,
)
from .spins import SpinSystem, dipolar_hamiltonian, sample_couplings

EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_ERROR = 3


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _fail_numerical(exc: Exception):
    click.echo(f"numerical diagnostic failure: {exc}", err=True)
    sys.exit(EXIT_NUMERICAL_ERROR)


def _load_sequence(name_or_file: str):
    key = name_or_file.upper()
    if key in BUILTIN_NAMES:
        return builtin(key)
    path = Path(name_or_file)
    if path.exists():
        return parse_sequence(path.read_text(), name=path.stem)
    raise click.UsageError(
        f"{name_or_file!r} is neither a built-in sequence nor a sequence file"
    )


@click.group()
def main():
    """Desk-scale dipolar-decoupling sequence simulator."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="JSON sweep configuration (defaults apply when omitted).")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Override a config field, e.g. --set n_spins=4 or --set sweep.parameter=tau_s (JSON values).")
@click.option("--output", type=click.Path(dir_okay=False), default="sweep.csv", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None, help="Defaults to the output suffix.")
@click.option("--threads", type=int, default=None, help="Worker threads (default: SPINWEAVE_THREADS or all cores).")
def sweep(config_path, overrides, output, fmt, threads):
    """Run a one-parameter ensemble-fidelity sweep."""
    doc = {}
    if config_path:
        doc = json.loads(Path(config_path).read_text())
    for item in overrides:
        if "=" not in item:
            raise click.UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        target = doc
        parts = key.split(".")
        for part in parts[:-1]:
            target = target.setdefault(part, {})
        target[parts[-1]] = value
    try:
        cfg = validate_config(doc)
    except ConfigError as exc:
        raise click.UsageError(str(exc)) from exc
    try:
        rows = run_sweep(cfg, threads=threads)
    except NumericalDiagnosticError as exc:
        _fail_numerical(exc)
    fmt = fmt or ("json" if str(output).endswith(".json") else "csv")
    if fmt == "csv":
        path = write_output(output, sweep_rows_to_csv(cfg, rows))
    else:
        path = write_output(output, json.dumps(sweep_rows_to_json(cfg, rows), indent=2) + "\n")
    click.echo(f"wrote {path}")


@main.group()
def seq():
    """Pulse-sequence tools."""


@seq.command("lint")
@click.argument("source")
def seq_lint(source):
    """Parse and analyze a sequence (built-in name or DSL file).

    Prints the cyclicity sign, window count M, pulse count, the F-matrix as
    an ASCII grid (rows X/Y/Z; '+', '-', '.'), per-row sums, and the
    decoupling class they imply.
    """
    sequence = _load_sequence(source)
    click.echo(f"sequence: {sequence.name}")
    click.echo(f"windows (M): {sequence.cycle_windows}")
    click.echo(f"pulses: {sequence.n_pulses}")
    try:
        sign = validate_cyclic(sequence)
    except ValueError as exc:
        click.echo(f"cyclic: NO ({exc})")
        sys.exit(EXIT_NUMERICAL_ERROR)
    click.echo(f"cyclic: yes, sign {sign:+d}")
    fm = frame_matrix(sequence)
    click.echo(ascii_frame(fm))
    sums, label = row_sum_check(fm)
    click.echo(f"row sums (X, Y, Z): {sums.tolist()}")
    click.echo(f"class: {label}")


@main.group(name="aht")
def aht_group():
    """Average-Hamiltonian analysis."""


@aht_group.command("terms")
@click.option("--seq", "seq_name", required=True, help="Built-in name or DSL file.")
@click.option("--orders", type=int, default=4, show_default=True)
@click.option("--spins", type=int, default=4, show_default=True)
@click.option("--coupling-sigma-hz", type=float, default=420.0 / 3.0, show_default=True)
@click.option("--offset-hz", type=float, default=0.0, show_default=True)
@click.option("--tau", "tau_s", type=float, default=4e-6, show_default=True)
@click.option("--seed", type=int, default=2026, show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), default="-", show_default=True, help="'-' prints to stdout.")
def aht_terms(seq_name, orders, spins, coupling_sigma_hz, offset_hz, tau_s, seed, output):
    """Magnus terms of one cycle as JSON, magnitudes normalized by |H_dip|."""
    sequence = _load_sequence(seq_name)
    system = SpinSystem.create(
        sample_couplings(seed, spins, coupling_sigma_hz), global_offset_hz=offset_hz
    )
    h_dip = dipolar_hamiltonian(system)
    try:
        series = magnus_series(system, sequence, tau_s, orders)
        magnitudes = term_magnitudes(series, h_dip)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    rows = []
    for order, term in enumerate(series.terms):
        size = frobenius_magnitude(term)
        rows.append(
            {
                "order": order,
                "magnitude_dipolar_normalized": float(magnitudes[order]),
                "trace_residual": float(abs(np.trace(term)) / max(size, 1e-300)),
                "hermiticity_residual": float(series.hermiticity_residuals[order]),
            }
        )
    document = {
        "sequence": sequence.name,
        "orders": orders,
        "n_spins": spins,
        "coupling_sigma_hz": coupling_sigma_hz,
        "global_offset_hz": offset_hz,
        "tau_s": tau_s,
        "base_seed": seed,
    }
    text = json.dumps(
        {"config": document, "config_sha256": config_digest(document), "terms": rows},
        indent=2,
    )
    if output == "-":
        click.echo(text)
    else:
        click.echo(f"wrote {write_output(output, text + chr(10))}")


@main.group()
def exp():
    """Simulated experiments."""


@exp.command("autocorr")
@click.option("--seq", "seq_name", required=True)
@click.option("--spins", type=int, default=4, show_default=True)
@click.option("--tau", "tau_s", type=float, default=4e-6, show_default=True)
@click.option("--pulse-width", type=float, default=0.0, show_default=True)
@click.option("--offset-hz", type=float, default=0.0, show_default=True)
@click.option("--coupling-sigma-hz", type=float, default=5000.0 / 3.0, show_default=True)
@click.option("--seed", type=int, default=2026, show_default=True)
@click.option("--blocks", default="0,1,2,4,8,16,32,64", show_default=True, help="Comma-separated cycle counts N; samples are taken at t = N*t_c.")
@click.option("--fit", "fit_model", type=click.Choice(["stretched", "oscillating"]), default=None, help="Also fit C_avg and write the result as JSON.")
@click.option("--output", type=click.Path(dir_okay=False), default="autocorr.csv", show_default=True)
def exp_autocorr(seq_name, spins, tau_s, pulse_width, offset_hz, coupling_sigma_hz, seed, blocks, fit_model, output):
    """X/Y/Z autocorrelation decay curves and their geometric mean.

    CSV columns: time_s, c_xx, c_yy, c_zz, c_avg (normalized to 1 at t=0).
    With --fit, writes <output>.fit.json holding the C_avg fit parameters.
    """
    sequence = _load_sequence(seq_name)
    system = SpinSystem.create(
        sample_couplings(seed, spins, coupling_sigma_hz), global_offset_hz=offset_hz
    )
    error = ErrorModel(pulse_width=pulse_width)
    try:
        block_list = [int(b) for b in blocks.split(",") if b.strip() != ""]
    except ValueError as exc:
        raise click.UsageError(f"bad --blocks value: {exc}") from exc
    try:
        curves = {
            axis: autocorrelation(system, sequence, error, tau_s, axis, block_list)
            for axis in ("x", "y", "z")
        }
    except NumericalDiagnosticError as exc:
        _fail_numerical(exc)
    avg = c_avg(curves["x"], curves["y"], curves["z"])
    document = {
        "sequence": sequence.name,
        "n_spins": spins,
        "tau_s": tau_s,
        "pulse_width_s": pulse_width,
        "global_offset_hz": offset_hz,
        "coupling_sigma_hz": coupling_sigma_hz,
        "base_seed": seed,
        "blocks": block_list,
    }
    lines = [
        "# spinweave autocorrelation",
        "# config: " + json.dumps(document, sort_keys=True, separators=(",", ":")),
        "# config_sha256: " + config_digest(document),
        "time_s,c_xx,c_yy,c_zz,c_avg",
    ]
    for i, t in enumerate(avg.times):
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    t,
                    curves["x"].values[i],
                    curves["y"].values[i],
                    curves["z"].values[i],
                    avg.values[i],
                )
            )
        )
    path = write_output(output, "\n".join(lines) + "\n")
    click.echo(f"wrote {path}")
    if fit_model:
        result = fit_decay(avg, model=fit_model)
        fit_doc = {
            "config": document,
            "model": result.model,
            "c0": result.c0,
            "c1": result.c1,
            "t2_eff": result.t2_eff,
            "stretch": result.stretch,
            "freq_hz": result.freq_hz,
            "time_to_1e_s": result.time_to_1e,
            "residual": result.residual,
            "converged": result.converged,
            "at_bound": result.at_bound,
        }
        fit_path = write_output(str(output) + ".fit.json", json.dumps(fit_doc, indent=2) + "\n")
        click.echo(f"wrote {fit_path}")


@exp.command("mqc")
@click.option("--spins", type=int, default=4, show_default=True)
@click.option("--tau-dq", type=float, default=1e-4, show_default=True, help="Total double-quantum growth time (s).")
@click.option("--m-cycles", type=int, default=1, show_default=True)
@click.option("--phi-count", type=int, default=None, help="Phase-tag grid size (default: power of two >= 4*spins).")
@click.option("--window", default=None, help="'free:<seconds>' or 'protected:<SEQ>:<cycles>[:<tau>]'.")
@click.option("--coupling-sigma-hz", type=float, default=5000.0 / 3.0, show_default=True)
@click.option("--seed", type=int, default=2026, show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), default="mqc.csv", show_default=True)
def exp_mqc(spins, tau_dq, m_cycles, phi_count, window, coupling_sigma_hz, seed, output):
    """Multiple-quantum coherence distribution from the tagged-echo protocol.

    CSV columns: order, intensity (normalized; they sum to the echo signal
    at phi=0).  The phase-resolved signal is written to <output>.signal.csv
    with columns phi_rad, signal.
    """
    system = SpinSystem.create(sample_couplings(seed, spins, coupling_sigma_hz))
    win = None
    if window:
        parts = window.split(":")
        try:
            if parts[0] == "free" and len(parts) == 2:
                win = FreeWindow(float(parts[1]))
            elif parts[0] == "protected" and len(parts) in (3, 4):
                tau = float(parts[3]) if len(parts) == 4 else 4e-6
                win = ProtectedWindow(_load_sequence(parts[1]), int(parts[2]), tau)
            else:
                raise ValueError("unrecognized window form")
        except ValueError as exc:
            raise click.UsageError(f"bad --window value {window!r}: {exc}") from exc
    try:
        result = mqc_experiment(system, tau_dq, m_cycles, phi_count, win)
    except NumericalDiagnosticError as exc:
        _fail_numerical(exc)
    document = {
        "n_spins": spins,
        "tau_dq_s": tau_dq,
        "m_cycles": m_cycles,
        "phi_count": result.meta["phi_count"],
        "window": window,
        "coupling_sigma_hz": coupling_sigma_hz,
        "base_seed": seed,
    }
    header = [
        "# spinweave mqc spectrum",
        "# config: " + json.dumps(document, sort_keys=True, separators=(",", ":")),
        "# config_sha256: " + config_digest(document),
        "order,intensity",
    ]
    for order, intensity in zip(result.spectrum.orders, result.spectrum.intensities):
        header.append(f"{order},{_fmt(intensity)}")
    path = write_output(output, "\n".join(header) + "\n")
    signal_lines = ["phi_rad,signal"]
    for phi, s in zip(result.phases, result.signals):
        signal_lines.append(f"{_fmt(phi)},{_fmt(s)}")
    signal_path = write_output(str(output) + ".signal.csv", "\n".join(signal_lines) + "\n")
    click.echo(f"wrote {path}")
    click.echo(f"wrote {signal_path}")


@main.command()
@click.argument("name")
@click.option("--profile", type=click.Choice(["paper", "ci"]), default="ci", show_default=True)
@click.option("--outdir", type=click.Path(file_okay=False), default=".", show_default=True)
@click.option("--threads", type=int, default=None)
def preset(name, profile, outdir, threads):
    """Run a figure preset; see PRESETS in the docs for the list."""
    try:
        paths = run_preset(name, profile=profile, outdir=outdir, threads=threads)
    except ConfigError as exc:
        raise click.UsageError(str(exc)) from exc
    except NumericalDiagnosticError as exc:
        _fail_numerical(exc)
    for p in paths:
        click.echo(f"wrote {p}")


main.help = (main.help or "") + "\n\nPresets: " + ", ".join(PRESET_NAMES)


if __name__ == "__main__":
    main()
