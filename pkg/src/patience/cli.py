"""Operator command line: KB validation, terminal consultations, case
simulation, benchmark runs, report emission, and the HTTP service.

Configuration precedence is flags, then an optional TOML config file, then
built-in defaults.  Exit codes: 0 on success, 1 on a domain error, 2 on a
usage error.  Diagnostics go to standard error; data goes to standard output
or the requested files.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import click

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import kb as kb_mod
from . import transcript
from .backends import BackendConfig
from .engine import Engine, SessionConfig
from .errors import PatienceError
from .metrics import confidence_evolution, entropy_curves, emit_report
from .sim import (
    BENCHMARK_POLICIES,
    benchmark_session_config,
    load_case_file,
    load_cases,
    load_run,
    run_benchmark,
    run_case,
    save_run,
    write_cases_csv,
)

_UNSET = object()


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as handle:
            return tomllib.load(handle)
    except OSError as exc:
        raise click.ClickException(f"cannot read config file {path}: {exc}")
    except tomllib.TOMLDecodeError as exc:
        raise click.ClickException(f"malformed config file {path}: {exc}")


def _pick(flag, file_values: dict, key: str, default):
    """Flags beat the config file; the config file beats the default."""
    if flag is not None:
        return flag
    if key in file_values:
        return file_values[key]
    return default


def _session_config(file_values: dict, **flags) -> SessionConfig:
    kind = _pick(flags.get("backend"), file_values, "backend", "scripted")
    remote = file_values.get("remote", {})
    backend = BackendConfig(
        kind=kind,
        script_dir=str(
            _pick(flags.get("script_bundle"), file_values, "script_bundle", "data/scripts")
        ),
        seed=int(_pick(flags.get("seed"), file_values, "seed", 0)),
        endpoint=str(remote.get("endpoint", "")),
        model_name=str(remote.get("model", "default")),
        api_key_env=str(remote.get("api_key_env", "PATIENCE_API_KEY")),
        timeout=float(remote.get("timeout", 30.0)),
        max_retries=int(remote.get("max_retries", 2)),
        temperature=float(remote.get("temperature", 0.0)),
        patient_temperature=float(remote.get("patient_temperature", 0.7)),
        max_concurrency=int(remote.get("max_concurrency", 4)),
    )
    defaults = SessionConfig(kb_path="", backend=backend)
    return dataclasses.replace(
        defaults,
        kb_path=str(_pick(flags.get("kb"), file_values, "kb", "data/sample_kb.jsonl")),
        k=int(_pick(flags.get("k"), file_values, "k", defaults.k)),
        l_max=int(_pick(flags.get("l_max"), file_values, "l_max", defaults.l_max)),
        max_turns=int(
            _pick(flags.get("max_turns"), file_values, "max_turns", defaults.max_turns)
        ),
        selection_mode=str(
            _pick(
                flags.get("selection_mode"),
                file_values,
                "selection_mode",
                defaults.selection_mode,
            )
        ),
        policy_seed=int(_pick(flags.get("seed"), file_values, "seed", 0)),
    )


def _engine_options(fn):
    options = [
        click.option("--kb", default=None, help="Knowledge base record file."),
        click.option(
            "--config",
            "config_path",
            default=None,
            help="TOML config file; flags override its values.",
        ),
        click.option(
            "--backend",
            type=click.Choice(["scripted", "remote"]),
            default=None,
            help="Generator backend implementation.",
        ),
        click.option(
            "--script-bundle",
            default=None,
            help="Directory of replay scripts for the scripted backend.",
        ),
        click.option("--seed", type=int, default=None, help="Deterministic seed."),
        click.option("--max-turns", type=int, default=None, help="Follow-up budget."),
        click.option("--k", type=int, default=None, help="Candidate pool size."),
        click.option(
            "--l-max", type=int, default=None, help="Simulated responses per question."
        ),
        click.option(
            "--selection-mode",
            type=click.Choice(["literal", "eig"]),
            default=None,
            help="Expected-entropy scoring variant.",
        ),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _fail_on_domain_error(invoke):
    try:
        return invoke()
    except PatienceError as exc:
        raise click.ClickException(str(exc))


@click.group()
def main() -> None:
    """Guideline-grounded diagnostic dialogue toolkit."""


@main.command()
@click.option("--kb", default=None, help="Knowledge base record file.")
@click.option("--config", "config_path", default=None, help="TOML config file.")
def ingest(kb, config_path):
    """Validate a knowledge base file and print record counts."""
    file_values = _load_config_file(config_path)
    kb_path = _pick(kb, file_values, "kb", "data/sample_kb.jsonl")
    base = _fail_on_domain_error(lambda: kb_mod.ingest(kb_path))
    surface_forms = sum(
        1 for s in base.symptoms.values() for name in (s.name_prof, s.name_cons) if name
    )
    specialties = {d.specialty for d in base.diseases.values() if d.specialty}
    click.echo(
        f"{kb_path}: {len(base.symptoms)} symptoms ({surface_forms} surface forms), "
        f"{len(base.diseases)} diseases, {len(specialties)} specialties"
    )


def _render_state(state) -> None:
    dist = state.distribution_history[-1]
    h = state.entropy_trace[-1]
    for disease_id, p in dist.top(5):
        bar = "#" * max(1, round(p * 30))
        click.echo(f"  {p:6.1%}  {disease_id:<26} {bar}")
    click.echo(f"  {dist.other_mass:6.1%}  (other)")
    click.echo(f"  H_{state.iteration} = {h:.3f} nats")


@main.command()
@_engine_options
@click.option("--opening", default=None, help="Opening statement (skips the prompt).")
@click.option("--out", default=None, help="Write the session transcript here.")
def consult(opening, out, config_path, **flags):
    """Run an interactive consultation in the terminal."""
    file_values = _load_config_file(config_path)
    config = _session_config(file_values, **flags)

    def drive():
        engine = Engine(config)
        statement = opening if opening is not None else click.prompt("Patient")
        state, question = engine.start_session(statement)
        _render_state(state)
        diagnosis = None
        while question is not None:
            click.echo(f"\nDoctor: {question.text}")
            answer = click.prompt("Patient")
            state, question, diagnosis = engine.step(state, answer)
            _render_state(state)
        click.echo(
            f"\nAssessment: {diagnosis.name} "
            f"(p={diagnosis.probability:.3f}, {diagnosis.turns} follow-ups, "
            f"stopped on {diagnosis.stop_reason})"
        )
        if out is not None:
            transcript.save(state, out)
            click.echo(f"transcript written to {out}")

    _fail_on_domain_error(drive)


@main.command()
@_engine_options
@click.option(
    "--case",
    "case_path",
    required=True,
    help="Patient profile file to drive the consultation.",
)
@click.option(
    "--policy",
    type=click.Choice(list(BENCHMARK_POLICIES)),
    default="app",
    show_default=True,
    help="Question selection policy.",
)
@click.option("--out", default=None, help="Write the outcome record as JSON.")
def simulate(case_path, policy, out, config_path, **flags):
    """Run one simulated consultation against a patient profile."""
    file_values = _load_config_file(config_path)
    config = _session_config(file_values, **flags)

    def drive():
        profile = load_case_file(case_path)
        outcome = run_case(profile, config, policy=policy)
        return profile, outcome

    profile, outcome = _fail_on_domain_error(drive)
    if outcome.failed:
        raise click.ClickException(f"case {profile.case_id} failed: {outcome.error}")
    final_h = outcome.entropy_trace[-1]
    click.echo(
        f"{profile.case_id} [{policy}]: {outcome.diagnosis_id} "
        f"(p={outcome.probability:.3f}) after {outcome.turns} follow-ups, "
        f"stop={outcome.stop_reason}, H_final={final_h:.4f}, "
        f"{'hit' if outcome.hit else 'miss'} (truth: {outcome.ground_truth})"
    )
    if out is not None:
        record = dataclasses.asdict(outcome)
        Path(out).write_text(json.dumps(record, sort_keys=True, indent=2) + "\n")
        click.echo(f"outcome written to {out}")


@main.command()
@_engine_options
@click.option(
    "--cases",
    "cases_dir",
    default=None,
    help="Directory of patient profile files.",
)
@click.option(
    "--policies",
    default=None,
    help="Comma-separated policy names (default: all).",
)
@click.option(
    "--out",
    default=None,
    help="Output directory for the run file and per-case CSV.",
)
def bench(cases_dir, policies, out, config_path, **flags):
    """Run the patient-simulator benchmark over a case directory."""
    file_values = _load_config_file(config_path)
    config = _session_config(file_values, **flags)
    cases_dir = _pick(cases_dir, file_values, "cases", "data/cases")
    out_dir = Path(_pick(out, file_values, "out", "bench-out"))
    raw_policies = _pick(policies, file_values, "policies", None)
    if raw_policies is None:
        policy_names = BENCHMARK_POLICIES
    elif isinstance(raw_policies, str):
        policy_names = tuple(p.strip() for p in raw_policies.split(",") if p.strip())
    else:
        policy_names = tuple(raw_policies)

    def drive():
        profiles = load_cases(cases_dir)
        horizon = config.max_turns
        run = run_benchmark(
            profiles,
            benchmark_session_config(config, horizon),
            policies=policy_names,
            seed=config.policy_seed,
        )
        run_path = save_run(run, out_dir / "run.json")
        csv_path = write_cases_csv(run, out_dir / "cases.csv")
        return run, run_path, csv_path

    run, run_path, csv_path = _fail_on_domain_error(drive)
    click.echo(f"benchmark: seed {run.seed}, horizon {run.horizon}, {len(run.case_ids)} cases")
    for agg in run.aggregates:
        click.echo(
            f"  {agg.policy}: hit_rate {agg.hit_rate:.2f}, "
            f"mean_turns {agg.mean_turns:.1f}, "
            f"final_entropy {agg.mean_final_entropy:.4f}, errors {agg.errors}"
        )
    click.echo(f"wrote {run_path} and {csv_path}")


@main.command()
@click.option("--run", "run_path", required=True, help="Benchmark run file to analyze.")
@click.option(
    "--out",
    default="report-out",
    show_default=True,
    help="Output directory for curve tables and the summary.",
)
@click.option("--config", "config_path", default=None, help="TOML config file.")
def report(run_path, out, config_path):
    """Emit entropy curves, confidence tables, and a summary for a run."""
    _load_config_file(config_path)

    def drive():
        run = load_run(run_path)
        curves = entropy_curves(run)
        evolutions = confidence_evolution(run)
        return emit_report(run, curves, evolutions, out)

    written = _fail_on_domain_error(drive)
    for path in written:
        click.echo(f"wrote {path}")


@main.command()
@_engine_options
@click.option(
    "--addr",
    default=None,
    help="Bind address as host:port [default: 127.0.0.1:8642].",
)
@click.option(
    "--transcripts",
    default="transcripts",
    show_default=True,
    help="Directory for completed session transcripts.",
)
@click.option(
    "--ui",
    "ui_dist",
    default="frontend/dist",
    show_default=True,
    help="Static chat client directory, served under /ui/ when present.",
)
def serve(addr, transcripts, ui_dist, config_path, **flags):
    """Serve the consultation HTTP API (and the chat UI when built)."""
    import uvicorn

    from .service import ServiceConfig, create_app

    file_values = _load_config_file(config_path)
    config = _session_config(file_values, **flags)
    addr = str(_pick(addr, file_values, "addr", "127.0.0.1:8642"))
    host, _, port_text = addr.rpartition(":")
    if not host or not port_text.isdigit():
        raise click.ClickException(f"malformed --addr value: {addr!r} (want host:port)")
    app = _fail_on_domain_error(
        lambda: create_app(
            ServiceConfig(
                session=config, transcript_dir=transcripts, ui_dist=ui_dist
            )
        )
    )
    uvicorn.run(app, host=host, port=int(port_text), log_level="info")


if __name__ == "__main__":
    main()
