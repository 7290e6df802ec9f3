import csv
import filecmp
import os

import numpy as np
import pytest

from giftwrap.execution import TickLog
from giftwrap.harness import (
    AblationSpec,
    PISWeights,
    SuccessCriteria,
    compute_pis,
    emit_report,
    judge_success,
    paired_permutation_p,
    summarize,
)
from giftwrap.harness.episode import EpisodeResult
from giftwrap.sim import DefectScores, Simulator

# published integrity rows: (T, W, E) -> PI, reproduced exactly by the
# default weights (0.5, 0.3, 0.2)
INTEGRITY_ROWS = [
    ((0.00, 0.22, 0.22), 0.890),
    ((0.00, 0.25, 0.18), 0.889),
    ((0.00, 0.20, 0.16), 0.908),
    ((0.00, 0.10, 0.12), 0.946),
    ((0.02, 0.06, 0.05), 0.962),
    ((0.00, 0.10, 0.05), 0.960),
]


def test_integrity_score_reproduces_published_rows():
    w = PISWeights()
    for (t, wr, e), expected in INTEGRITY_ROWS:
        pi = compute_pis(DefectScores(t, wr, e), w)
        assert pi == pytest.approx(expected, abs=1e-3)


def test_integrity_score_extremes():
    assert compute_pis(DefectScores(0, 0, 0)) == pytest.approx(1.0)
    assert compute_pis(DefectScores(1, 1, 1)) == pytest.approx(0.0)
    # no clamping below zero with out-of-range weights
    assert compute_pis(DefectScores(1, 1, 1), PISWeights(2, 1, 1)) < 0


def test_pis_weights_validation():
    with pytest.raises(ValueError):
        PISWeights(-0.1, 0.3, 0.2)


def test_judge_rejects_any_tear():
    sim = Simulator()
    state = sim.reset("subtask-1")
    sim.mark_stage_complete(state, 1)
    state.chain.torn[4] = True
    ok, violations = judge_success(sim, state)
    assert not ok
    assert any("torn" in v for v in violations)


def test_judge_monotone_in_thresholds():
    sim = Simulator()
    state = sim.reset("subtask-2")   # stage 1 preloaded and nearly ideal
    tight = SuccessCriteria(max_crease_rms=1e-6, max_wrinkle=1e-6, max_edge=1e-6)
    loose = SuccessCriteria(max_crease_rms=1.0, max_wrinkle=1.0, max_edge=1.0)
    ok_tight, _ = judge_success(sim, state, tight)
    ok_loose, _ = judge_success(sim, state, loose)
    assert ok_loose and not ok_tight


def test_permutation_test_direction():
    a = [1, 1, 1, 1, 1, 1, 0, 1, 1, 1]
    b = [0, 0, 1, 0, 0, 1, 0, 0, 0, 1]
    assert paired_permutation_p(a, b) < 0.05
    assert paired_permutation_p(b, a) > 0.5


def test_ablation_spec_validation():
    with pytest.raises(ValueError):
        AblationSpec(("full", "bogus"))
    with pytest.raises(ValueError):
        AblationSpec(("full",), episodes=0)


def _fake_result(pi=0.93):
    return EpisodeResult(
        success=True, per_subtask={1: True}, scores=DefectScores(0, 0.1, 0.05),
        pi=pi, duration_s=120.0, peak_force=9.5, mean_force=2.2,
        mean_force_error=0.6, violations=[], timeouts=0,
        subtask_results={}, trace=[])


def _fake_rows(variant, successes):
    return [{"variant": variant, "seed": k, "success": s, "pi": 0.9 + 0.01 * s,
             "mean_force": 3.0 - s, "peak_force": 8.0, "duration": 100.0,
             "timeouts": 1 - s, "boundary_failure": 0, "trace_hash": "x",
             "per_subtask": {1: s}} for k, s in enumerate(successes)]


def test_emit_report_deterministic_csv(tmp_path):
    out1 = tmp_path / "r1"
    out2 = tmp_path / "r2"
    summaries = {
        "full": summarize("full", _fake_rows("full", [1] * 9 + [0])),
        "no_ft_input": summarize("no_ft_input", _fake_rows("no_ft_input",
                                                           [1, 0] * 5)),
    }
    files1 = emit_report(str(out1), episode=_fake_result(), summaries=summaries,
                         force_logs={"demo": [TickLog(0.0, 1.0, 1.2, 0.001, 0.0),
                                              TickLog(0.1, 2.0, 1.2, 0.001, 0.0)]})
    files2 = emit_report(str(out2), episode=_fake_result(), summaries=summaries,
                         force_logs={"demo": [TickLog(0.0, 1.0, 1.2, 0.001, 0.0),
                                              TickLog(0.1, 2.0, 1.2, 0.001, 0.0)]})
    for a, b in zip(sorted(files1), sorted(files2)):
        if a.endswith(".csv") or a.endswith(".md"):
            assert open(a, "rb").read() == open(b, "rb").read()
    names = {os.path.basename(f) for f in files1}
    assert {"episode.csv", "ablation.csv", "significance.csv", "summary.md",
            "episode_pi.png", "ablation_success.png",
            "force_profile.png"} <= names
    # figures actually rendered
    for f in files1:
        if f.endswith(".png"):
            assert os.path.getsize(f) > 2000


def test_episode_report_single_row(tmp_path):
    files = emit_report(str(tmp_path / "ep"), episode=_fake_result())
    csv_path = [f for f in files if f.endswith("episode.csv")][0]
    with open(csv_path) as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 2  # header + one row
    md = open([f for f in files if f.endswith(".md")][0]).read()
    assert "PI breakdown" in md
