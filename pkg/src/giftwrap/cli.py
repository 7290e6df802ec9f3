"""Command-line entry point.

Subcommands: collect, train-il, train-rl, plan, run, ablate,
compare-modular, report. Hyperparameters layer: built-in defaults, then an
optional JSON config file, then repeated --set key=value overrides. Exit
code 2 flags validation errors (bad arguments, schemas, vocabulary), 1
runtime failures.
"""

from __future__ import annotations

import json
import os
import sys

import click
import numpy as np
import torch

from .demos.dataset import generate_dataset, load_dataset, load_manifest
from .demos.expert import ScriptedExpertConfig
from .execution import FRAME_CAPS, SubtaskExecutor
from .harness.ablation import (AblationSpec, VariantArtifacts, run_ablation)
from .harness.episode import EpisodeOptions, run_episode
from .harness.metrics import PISWeights, compute_pis
from .harness.report import emit_report
from .planner.compiler import compile_plan, serialize_plan, validate_plan
from .planner.grammar import Instruction, UnrecognizedIntent, decompose_steps, plan_subtask_ids
from .planner.remote import RemoteBackend, plan_with_fallback
from .policy.network import PolicyConfig
from .policy.runtime import load_checkpoint
from .policy.train import train as train_policy
from .residual.profile import time_binned_profile
from .residual.sac import SACAgent, SACConfig
from .residual.train import train_residual
from .sim.config import SimConfig
from .sim.core import Simulator

VALIDATION_EXIT = 2


def _apply_overrides(obj, overrides: dict, prefix: str):
    for key, value in overrides.items():
        if not key.startswith(prefix + "."):
            continue
        name = key.split(".", 1)[1]
        if not hasattr(obj, name):
            raise click.UsageError(f"unknown option {key}")
        current = getattr(obj, name)
        setattr(obj, name, type(current)(value) if current is not None else value)
    return obj


def _load_layers(config_file: str | None, sets: tuple[str, ...]) -> dict:
    layers: dict = {}
    if config_file:
        with open(config_file) as fh:
            layers.update(json.load(fh))
    for item in sets:
        if "=" not in item:
            raise click.UsageError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        try:
            layers[key] = json.loads(value)
        except json.JSONDecodeError:
            layers[key] = value
    return layers


@click.group()
@click.option("--config", "config_file", type=click.Path(exists=True),
              default=None, help="JSON config file with dotted keys")
@click.option("--set", "sets", multiple=True,
              help="override, e.g. --set sim.tear_tension=6.0")
@click.option("--threads", default=1, show_default=True)
@click.pass_context
def main(ctx, config_file, sets, threads):
    torch.set_num_threads(threads)
    ctx.obj = _load_layers(config_file, sets)


def _sim_config(overrides: dict) -> SimConfig:
    return _apply_overrides(SimConfig(), overrides, "sim")


@main.command()
@click.option("--out", required=True, type=click.Path())
@click.option("--per-subtask", default=5, show_default=True)
@click.option("--subtasks", default="1,2,3,4,5", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--images/--no-images", default=False, show_default=True)
@click.pass_obj
def collect(overrides, out, per_subtask, subtasks, seed, images):
    """Generate a scripted-expert demonstration dataset."""
    try:
        stages = [int(s) for s in subtasks.split(",") if s.strip()]
    except ValueError:
        raise click.UsageError("--subtasks must be comma-separated ids")
    expert_cfg = _apply_overrides(ScriptedExpertConfig(), overrides, "expert")
    sim_cfg = _sim_config(overrides)
    render_fn = None
    if images:
        from .sim.render import render_observation
        render_fn = render_observation
    counts = {s: per_subtask for s in stages}
    manifest = generate_dataset(
        lambda: Simulator(sim_cfg), out, counts, expert_cfg, base_seed=seed,
        record_images=images, render_fn=render_fn,
        progress=lambda st, k, n: click.echo(
            f"  sub-task {st} demo {k}: {n} frames"))
    click.echo(f"wrote {manifest.count} demos to {out}")


@main.command("train-il")
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--epochs", default=60, show_default=True)
@click.option("--no-subtask-id", is_flag=True, help="ablation: drop conditioning")
@click.option("--no-ft", is_flag=True, help="ablation: drop the wrench input")
@click.option("--images", is_flag=True, help="train the vision encoder path")
@click.option("--subtasks", default=None, help="restrict to these sub-tasks")
@click.option("--metrics", "metrics_path", default=None, type=click.Path())
@click.pass_obj
def train_il(overrides, dataset_dir, out, epochs, no_subtask_id, no_ft, images,
             subtasks, metrics_path):
    """Train the chunking policy on a demonstration dataset."""
    cfg = _apply_overrides(PolicyConfig(), overrides, "policy")
    cfg.epochs = epochs
    cfg.use_subtask = not no_subtask_id
    cfg.use_wrench = not no_ft
    cfg.use_images = images
    manifest = load_manifest(dataset_dir)
    scen = tuple(int(s) for s in subtasks.split(",")) if subtasks else None
    ds = load_dataset(manifest, cfg.chunk_length, with_images=images,
                      scenarios=scen)
    _, history = train_policy(ds, cfg, checkpoint_path=out,
                              metrics_path=metrics_path, log=click.echo)
    click.echo(f"final loss {history[-1]['loss']:.4f}; checkpoint at {out}")


@main.command("train-rl")
@click.option("--policy", "policy_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--episodes", default=12, show_default=True)
@click.option("--stages", default="1", show_default=True)
@click.option("--curves", "curves_path", default=None, type=click.Path())
@click.pass_obj
def train_rl(overrides, policy_path, dataset_dir, out, episodes, stages,
             curves_path):
    """Train the residual admittance agent against the simulator."""
    sim_cfg = _sim_config(overrides)
    sac_cfg = _apply_overrides(SACConfig(), overrides, "sac")
    runtime = load_checkpoint(policy_path)
    manifest = load_manifest(dataset_dir)
    stage_list = [int(s) for s in stages.split(",")]
    profiles = {s: time_binned_profile(s, manifest) for s in stage_list}
    expected = {s: int(np.mean([r.frames for r in manifest.demos
                                if r.scenario == s])) for s in stage_list}

    def factory():
        sim = Simulator(SimConfig(**{**sim_cfg.__dict__}))
        executor = SubtaskExecutor(sim, runtime)
        return executor, lambda stage: sim.reset(f"subtask-{stage}")

    agent, curves = train_residual(
        factory, stage_list, episodes, config=sac_cfg,
        force_profiles=profiles, expected_ticks=expected,
        curves_path=curves_path, log=click.echo)
    agent.save(out)
    click.echo(f"agent saved to {out}")


@main.command()
@click.argument("instruction", nargs=-1, required=True)
@click.option("--remote/--no-remote", default=False,
              help="try the remote backend first")
@click.option("--out", default=None, type=click.Path())
@click.pass_obj
def plan(overrides, instruction, remote, out):
    """Parse an instruction into sub-task ids and an executable plan."""
    text = " ".join(instruction)
    try:
        inst = Instruction(text)
        backend = RemoteBackend() if remote else None
        ids, steps, used = plan_with_fallback(inst, backend)
        compiled = compile_plan(steps, ids, config=_sim_config(overrides),
                                provenance=used, instruction_text=text)
    except (UnrecognizedIntent, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(VALIDATION_EXIT)
    click.echo(f"backend: {used}")
    click.echo("sub-task ids: " + " ".join(str(i) for i in ids.ids))
    click.echo("steps:")
    for s in steps:
        click.echo(f"  [{s.subtask}] {s.description} -> {s.primitive_hint}")
    problems = validate_plan(compiled)
    click.echo("validation: " + ("ok" if not problems else "; ".join(problems)))
    if out:
        with open(out, "w") as fh:
            fh.write(serialize_plan(compiled))
        click.echo(f"plan written to {out}")


@main.command()
@click.option("--policy", "policy_path", required=True, type=click.Path(exists=True))
@click.option("--instruction", default="wrap the box", show_default=True)
@click.option("--agent", "agent_path", default=None, type=click.Path(exists=True))
@click.option("--dataset", "dataset_dir", default=None, type=click.Path(exists=True),
              help="demo dataset for the force reference")
@click.option("--out", default="runs/episode", show_default=True, type=click.Path())
@click.option("--manual-transition", is_flag=True)
@click.option("--position-only", is_flag=True)
@click.pass_obj
def run(overrides, policy_path, instruction, agent_path, dataset_dir, out,
        manual_transition, position_only):
    """Run one policy-driven episode from an instruction."""
    try:
        inst = Instruction(instruction)
        ids = plan_subtask_ids(inst)
        compiled = compile_plan(decompose_steps(inst), ids,
                                config=_sim_config(overrides),
                                instruction_text=instruction)
    except (UnrecognizedIntent, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(VALIDATION_EXIT)
    runtime = load_checkpoint(policy_path)
    agent = SACAgent.load(agent_path) if agent_path else None
    opts = EpisodeOptions(manual_transition=manual_transition,
                          stiff_position_only=position_only,
                          use_residual=agent is not None)
    profiles = expected = None
    if dataset_dir:
        manifest = load_manifest(dataset_dir)
        profiles = {s: time_binned_profile(s, manifest) for s in ids.ids}
        expected = {s: int(np.mean([r.frames for r in manifest.demos
                                    if r.scenario == s] or [FRAME_CAPS[s]]))
                    for s in ids.ids}
    sim = Simulator(_sim_config(overrides))
    result = run_episode(sim, compiled, runtime, agent=agent, options=opts,
                         force_profiles=profiles, expected_ticks=expected)
    click.echo(f"success={result.success} PI={result.pi:.3f} "
               f"T={result.scores.T:.3f} W={result.scores.W:.3f} "
               f"E={result.scores.E:.3f} peak={result.peak_force:.2f} N "
               f"duration={result.duration_s:.1f} s")
    force_logs = {f"sub-task {k}": r.logs for k, r in result.subtask_results.items()}
    files = emit_report(out, episode=result, force_logs=force_logs)
    click.echo("report: " + ", ".join(files))
    if not result.success:
        for v in result.violations:
            click.echo(f"  violation: {v}")


def _artifacts_from_options(policy, no_id, no_ft, modular_dir, agent):
    modular = None
    if modular_dir:
        modular = {}
        for sid in range(1, 6):
            path = os.path.join(modular_dir, f"subtask_{sid}.pt")
            modular[sid] = path
    return VariantArtifacts(unified=policy, no_subtask_id=no_id,
                            no_ft_input=no_ft, modular=modular, residual=agent)


@main.command()
@click.option("--variants", default="full,no_subtask_id,no_ft_input,manual_transition,position_only",
              show_default=True)
@click.option("--episodes", default=50, show_default=True)
@click.option("--policy", "policy_path", required=True, type=click.Path(exists=True))
@click.option("--no-id-policy", default=None, type=click.Path())
@click.option("--no-ft-policy", default=None, type=click.Path())
@click.option("--modular-dir", default=None, type=click.Path())
@click.option("--agent", "agent_path", default=None, type=click.Path())
@click.option("--dataset", "dataset_dir", default=None, type=click.Path(exists=True))
@click.option("--instruction", default="wrap the box", show_default=True)
@click.option("--out", default="runs/ablation", show_default=True)
@click.option("--workers", default=None, type=int)
@click.pass_obj
def ablate(overrides, variants, episodes, policy_path, no_id_policy,
           no_ft_policy, modular_dir, agent_path, dataset_dir, instruction,
           out, workers):
    """Matched-seed ablation batches with significance tests."""
    try:
        spec = AblationSpec(tuple(v.strip() for v in variants.split(",")),
                            episodes=episodes)
        inst = Instruction(instruction)
        compiled = compile_plan(decompose_steps(inst), plan_subtask_ids(inst),
                                config=_sim_config(overrides),
                                instruction_text=instruction)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(VALIDATION_EXIT)
    artifacts = _artifacts_from_options(policy_path, no_id_policy,
                                        no_ft_policy, modular_dir, agent_path)
    profiles = expected = None
    if dataset_dir:
        manifest = load_manifest(dataset_dir)
        stages = sorted({r.scenario for r in manifest.demos})
        profiles = {s: time_binned_profile(s, manifest) for s in stages}
        expected = {s: int(np.mean([r.frames for r in manifest.demos
                                    if r.scenario == s])) for s in stages}
    try:
        summaries = run_ablation(
            spec, compiled, artifacts, force_profiles=profiles,
            expected_ticks=expected, base_config=_sim_config(overrides),
            workers=workers,
            progress=lambda v, s: click.echo(f"  {v} seed {s} done"))
    except FileNotFoundError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(VALIDATION_EXIT)
    files = emit_report(out, summaries=summaries, title="ablation report")
    for v, s in sorted(summaries.items()):
        click.echo(f"{v}: success {s.success_rate:.2f} PI {s.mean_pi:.3f} "
                   f"force {s.mean_force:.2f} N timeouts {s.timeout_rate:.2f}")
    click.echo("report: " + ", ".join(files))


@main.command("compare-modular")
@click.option("--policy", "policy_path", required=True, type=click.Path(exists=True))
@click.option("--modular-dir", required=True, type=click.Path(exists=True))
@click.option("--agent", "agent_path", default=None, type=click.Path())
@click.option("--dataset", "dataset_dir", default=None, type=click.Path(exists=True))
@click.option("--episodes", default=50, show_default=True)
@click.option("--out", default="runs/modular", show_default=True)
@click.option("--workers", default=None, type=int)
@click.pass_obj
def compare_modular(overrides, policy_path, modular_dir, agent_path,
                    dataset_dir, episodes, out, workers):
    """Unified policy versus per-sub-task policies with a learned switcher."""
    inst = Instruction("wrap the box")
    compiled = compile_plan(decompose_steps(inst), plan_subtask_ids(inst),
                            config=_sim_config(overrides),
                            instruction_text=inst.text)
    artifacts = _artifacts_from_options(policy_path, None, None, modular_dir,
                                        agent_path)
    spec = AblationSpec(("full", "modular"), episodes=episodes)
    profiles = expected = None
    if dataset_dir:
        manifest = load_manifest(dataset_dir)
        stages = sorted({r.scenario for r in manifest.demos})
        profiles = {s: time_binned_profile(s, manifest) for s in stages}
        expected = {s: int(np.mean([r.frames for r in manifest.demos
                                    if r.scenario == s])) for s in stages}
    summaries = run_ablation(spec, compiled, artifacts, force_profiles=profiles,
                             expected_ticks=expected,
                             base_config=_sim_config(overrides), workers=workers)
    files = emit_report(out, summaries=summaries,
                        title="unified vs modular")
    uni, mod = summaries["full"], summaries["modular"]
    click.echo(f"unified: success {uni.success_rate:.2f} peak {uni.peak_force:.2f} N")
    click.echo(f"modular: success {mod.success_rate:.2f} peak {mod.peak_force:.2f} N "
               f"boundary failures {mod.boundary_failures}")
    click.echo("report: " + ", ".join(files))


@main.command()
@click.option("--episode-csv", default=None, type=click.Path(exists=True))
@click.option("--out", default="runs/report", show_default=True)
def report(episode_csv, out):
    """Re-render report files from saved tables."""
    os.makedirs(out, exist_ok=True)
    if episode_csv:
        import csv as _csv
        with open(episode_csv) as fh:
            rows = list(_csv.reader(fh))
        md = ["# giftwrap report", "", "| " + " | ".join(rows[0]) + " |",
              "|" + "---|" * len(rows[0])]
        md += ["| " + " | ".join(r) + " |" for r in rows[1:]]
        path = os.path.join(out, "summary.md")
        with open(path, "w") as fh:
            fh.write("\n".join(md) + "\n")
        click.echo(f"wrote {path}")
    else:
        click.echo("nothing to render; pass --episode-csv")


if __name__ == "__main__":
    main()
