import numpy as np
import pytest
import torch

from giftwrap.policy import (
    Action,
    ActionChunk,
    NormStats,
    PolicyConfig,
    StartPolicy,
    TemporalEnsemble,
    detect_transition,
    embed_subtask,
    il_loss,
)
from giftwrap.policy.rotation import random_rotation, rot6d_from_matrix
from giftwrap.policy.runtime import PolicyRuntime, load_checkpoint, save_checkpoint
from giftwrap.policy.types import Observation
from giftwrap.subtasks import SUBTASKS


def tiny_cfg(**kw):
    kw.setdefault("d_model", 16)
    kw.setdefault("n_heads", 2)
    kw.setdefault("ffn_dim", 32)
    kw.setdefault("chunk_length", 4)
    kw.setdefault("enc_layers", 1)
    kw.setdefault("dec_layers", 1)
    return PolicyConfig(**kw)


def rand_batch(cfg, n=3, seed=0):
    g = torch.Generator().manual_seed(seed)
    batch = {
        "robot_state": torch.randn(n, 4, generator=g),
        "wrench": torch.randn(n, 6, generator=g),
        "subtask": torch.randint(1, 6, (n,), generator=g),
        "features": torch.randn(n, cfg.feature_dim, generator=g),
        "actions": torch.randn(n, cfg.chunk_length, 10, generator=g),
        "transition": torch.zeros(n, cfg.chunk_length),
        "mask": torch.ones(n, cfg.chunk_length, dtype=torch.bool),
    }
    return batch


def test_output_shapes():
    cfg = tiny_cfg()
    model = StartPolicy(cfg)
    batch = rand_batch(cfg)
    actions, flags = model(batch)
    assert actions.shape == (3, cfg.chunk_length, 10)
    assert flags.shape == (3, cfg.chunk_length)


def test_evaluation_determinism():
    cfg = tiny_cfg()
    torch.manual_seed(0)
    model = StartPolicy(cfg).eval()
    batch = rand_batch(cfg)
    with torch.no_grad():
        a1, f1 = model(batch)
        a2, f2 = model(batch)
    assert torch.equal(a1, a2) and torch.equal(f1, f2)


def test_subtask_embedding_lookup_and_errors():
    cfg = tiny_cfg()
    model = StartPolicy(cfg)
    a = embed_subtask(model, SUBTASKS[1])
    b = embed_subtask(model, 1)
    assert np.allclose(a, b)
    with pytest.raises(KeyError):
        embed_subtask(model, 9)
    fake_encoder = lambda text: np.full(3, float(len(text)))
    vec = embed_subtask(model, SUBTASKS[2], encoder=fake_encoder)
    assert vec.shape == (3,)
    # blank descriptions are rejected at the type boundary
    from giftwrap.subtasks import SubTaskID
    with pytest.raises(ValueError):
        SubTaskID(1, "  ")


def test_il_loss_zero_on_perfect_match():
    cfg = tiny_cfg()
    target = torch.randn(2, cfg.chunk_length, 10)
    flags = torch.zeros(2, cfg.chunk_length)
    logits = torch.full_like(flags, -40.0)  # sigmoid ~ 0
    mask = torch.ones_like(flags, dtype=torch.bool)
    total, parts = il_loss(target, logits, target, flags, mask, cfg)
    assert parts["recon"] == 0.0
    assert parts["flag"] < 1e-6


def test_il_loss_l1_arithmetic():
    cfg = tiny_cfg(w_recon=2.0, w_flag=0.0)
    target = torch.zeros(1, cfg.chunk_length, 10)
    pred = target.clone()
    pred[0, :, 3] += 0.25  # constant offset on one dim
    flags = torch.zeros(1, cfg.chunk_length)
    mask = torch.ones_like(flags, dtype=torch.bool)
    total, parts = il_loss(pred, flags, target, flags, mask, cfg)
    assert parts["recon"] == pytest.approx(0.25 / 10)
    assert float(total) == pytest.approx(2.0 * 0.25 / 10)


def test_il_loss_length_mismatch_raises():
    cfg = tiny_cfg()
    with pytest.raises(ValueError):
        il_loss(torch.zeros(1, 3, 10), torch.zeros(1, 3),
                torch.zeros(1, 4, 10), torch.zeros(1, 4),
                torch.ones(1, 4, dtype=torch.bool), cfg)


def test_il_loss_gradients_match_finite_differences():
    """Central finite differences over every parameter of a tiny model."""
    cfg = tiny_cfg(latent_dim=0)
    torch.manual_seed(3)
    model = StartPolicy(cfg).double()
    batch = rand_batch(cfg, n=2, seed=5)
    batch = {k: (v.double() if v.is_floating_point() else v)
             for k, v in batch.items()}
    batch["transition"][0, -1] = 1.0

    def loss_value():
        pred, logits = model(batch)
        total, _ = il_loss(pred, logits, batch["actions"], batch["transition"],
                           batch["mask"], cfg)
        return total

    model.zero_grad()
    loss_value().backward()
    eps = 1e-6
    worst = 0.0
    rng = np.random.default_rng(0)
    for name, p in model.named_parameters():
        if p.grad is None:
            continue
        flat = p.data.view(-1)
        gflat = p.grad.view(-1)
        for idx in rng.choice(flat.numel(), size=min(4, flat.numel()),
                              replace=False):
            old = flat[idx].item()
            flat[idx] = old + eps
            up = loss_value().item()
            flat[idx] = old - eps
            dn = loss_value().item()
            flat[idx] = old
            fd = (up - dn) / (2 * eps)
            g = gflat[idx].item()
            rel = abs(fd - g) / max(abs(fd), abs(g), 1e-8)
            worst = max(worst, rel)
    assert worst < 1e-4


def test_temporal_ensemble_identity_and_average(rng):
    rot = rot6d_from_matrix(random_rotation(rng))
    acts = np.tile(np.concatenate([[0.1, 0.2, 0.0], rot, [0.03]]), (5, 1))
    chunk = ActionChunk(acts, np.full(5, 0.7), start_tick=0)
    ens = TemporalEnsemble(0.3)
    ens.add(chunk)
    action, prob = ens.action_at(2)
    assert np.allclose(action.to_vector(), acts[2])
    assert prob == pytest.approx(0.7)

    # two identical overlapping chunks change nothing
    ens = TemporalEnsemble(0.3)
    ens.add(ActionChunk(acts, np.zeros(5), start_tick=0))
    ens.add(ActionChunk(acts.copy(), np.zeros(5), start_tick=2))
    action, _ = ens.action_at(3)
    assert np.allclose(action.to_vector(), acts[0], atol=1e-12)

    # opposite positions with equal weights average to the midpoint
    a = np.concatenate([[0.0, 0.0, 0.0], rot, [0.0]])
    b = np.concatenate([[1.0, 0.0, 0.0], rot, [0.0]])
    ens = TemporalEnsemble(decay=1.0)
    ens.add(ActionChunk(np.tile(a, (3, 1)), np.zeros(3), start_tick=0))
    ens.add(ActionChunk(np.tile(b, (3, 1)), np.ones(3), start_tick=0))
    action, prob = ens.action_at(0)
    assert action.position[0] == pytest.approx(0.5)
    assert prob == pytest.approx(0.5)


def test_ensemble_decode_is_valid_rotation(rng):
    chunks = []
    for k in range(3):
        rot = rot6d_from_matrix(random_rotation(rng))
        acts = np.tile(np.concatenate([rng.normal(0, 0.1, 3), rot, [0.01]]),
                       (4, 1))
        chunks.append(ActionChunk(acts, np.zeros(4), start_tick=0))
    ens = TemporalEnsemble(0.5)
    for c in chunks:
        ens.add(c)
    action, _ = ens.action_at(1)
    R = action.rotation_matrix()
    assert np.allclose(R.T @ R, np.eye(3), atol=1e-6)


def test_ensemble_requires_coverage():
    ens = TemporalEnsemble(0.5)
    with pytest.raises(LookupError):
        ens.action_at(0)


def test_detect_transition_debounce_and_boundary():
    assert detect_transition([0.9, 0.9, 0.9])
    assert not detect_transition([0.9, 0.4, 0.9])
    assert detect_transition([0.5, 0.5, 0.5])          # >= semantics
    assert not detect_transition([0.9, 0.9])
    with pytest.raises(ValueError):
        detect_transition([1.2])


def test_checkpoint_round_trip(tmp_path):
    cfg = tiny_cfg()
    torch.manual_seed(1)
    model = StartPolicy(cfg)
    stats = NormStats(action_mean=np.zeros(10), action_std=np.ones(10),
                      feature_mean=np.zeros(cfg.feature_dim),
                      feature_std=np.ones(cfg.feature_dim))
    path = tmp_path / "pol.pt"
    save_checkpoint(str(path), model, stats)
    runtime = load_checkpoint(str(path))
    obs = Observation(robot_state=np.zeros(4), wrench=np.zeros(6),
                      subtask=SUBTASKS[1], features=np.zeros(cfg.feature_dim))
    chunk = runtime.predict_chunk(obs)
    direct = PolicyRuntime(model, stats)
    chunk2 = direct.predict_chunk(obs)
    assert np.allclose(chunk.actions, chunk2.actions)
    assert chunk.actions.shape == (cfg.chunk_length, 10)
    assert np.all((chunk.transition_prob >= 0) & (chunk.transition_prob <= 1))


def test_predict_chunk_rejects_unknown_subtask(tmp_path):
    cfg = tiny_cfg()
    model = StartPolicy(cfg)
    stats = NormStats(action_mean=np.zeros(10), action_std=np.ones(10),
                      feature_mean=np.zeros(cfg.feature_dim),
                      feature_std=np.ones(cfg.feature_dim))
    runtime = PolicyRuntime(model, stats, vocab={1: "x"})
    from giftwrap.subtasks import SubTaskID
    obs = Observation(robot_state=np.zeros(4), wrench=np.zeros(6),
                      subtask=SubTaskID(3, "other"),
                      features=np.zeros(cfg.feature_dim))
    with pytest.raises(KeyError):
        runtime.predict_chunk(obs)
