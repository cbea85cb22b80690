"""Clipped-objective policy optimization with generalized advantage
estimation over a vectorized environment batch, including truncated-BPTT
handling for the recurrent architectures, curriculum staging, metric
logging, and bit-for-bit resumable train state.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .envs import (
    EnvBatch,
    EnvConfig,
    EnvKind,
    EpisodeStats,
    assign_env_kinds,
    curriculum_schedule,
    make_env_batch,
)
from .geometry import LidarSpec
from .nets import (
    ArchitectureSpec,
    SharedControlPolicy,
    make_policy,
    resolve_architecture,
    save_checkpoint,
)
from .obs import gaussian_log_prob
from .reward import RewardWeights


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class PPOHyperparams:
    learning_rate: float = 5e-4
    entropy_coef: float = 1e-2
    eps_clip: float = 0.2
    horizon: int = 128
    minibatch_size: int = 4096
    mini_epochs: int = 4
    n_envs: int = 128
    gamma: float = 0.99
    gae_lambda: float = 0.95
    value_coef: float = 0.5
    max_grad_norm: float = 1.0
    bptt_chunk: int = 16

    def __post_init__(self):
        if (self.n_envs * self.horizon) % self.minibatch_size:
            raise ValueError("n_envs * horizon must be divisible by minibatch_size")
        if self.horizon % self.bptt_chunk:
            raise ValueError("horizon must be divisible by bptt_chunk")
        if self.minibatch_size % self.bptt_chunk:
            raise ValueError("minibatch_size must be divisible by bptt_chunk")


class ValueNormalizer:
    """Running mean/std of returns; the value head regresses the normalized
    target and predictions are denormalized before GAE."""

    def __init__(self):
        self.mean = 0.0
        self.var = 1.0
        self.count = 1e-4

    def update(self, returns: np.ndarray) -> None:
        flat = returns.reshape(-1)
        batch_mean = float(flat.mean())
        batch_var = float(flat.var())
        batch_count = flat.size
        delta = batch_mean - self.mean
        total = self.count + batch_count
        self.mean += delta * batch_count / total
        m_a = self.var * self.count
        m_b = batch_var * batch_count
        self.var = (m_a + m_b + delta**2 * self.count * batch_count / total) / total
        self.count = total

    @property
    def std(self) -> float:
        return float(np.sqrt(self.var) + 1e-8)

    def normalize(self, x):
        return (x - self.mean) / self.std

    def denormalize(self, x):
        return x * self.std + self.mean

    def state_dict(self) -> dict:
        return {"mean": self.mean, "var": self.var, "count": self.count}

    def load_state_dict(self, state: dict) -> None:
        self.mean, self.var, self.count = state["mean"], state["var"], state["count"]


@dataclass
class RolloutBuffer:
    """Per (env, t) transition storage for one collection phase."""

    obs: np.ndarray        # (N, T, D) float32
    actions: np.ndarray    # (N, T, 3)
    log_probs: np.ndarray  # (N, T)
    values: np.ndarray     # (N, T)
    rewards: np.ndarray    # (N, T)
    dones: np.ndarray      # (N, T) bool; True if the episode ended at step t
    bootstrap_value: np.ndarray  # (N,)
    hidden_h: np.ndarray | None = None  # (N, T, units) recurrent state before step t
    hidden_c: np.ndarray | None = None
    phi: np.ndarray | None = None       # (N, T) post-step heading angles
    tracking: np.ndarray | None = None  # (N, T) tracking reward term

    @property
    def n_transitions(self) -> int:
        return self.obs.shape[0] * self.obs.shape[1]


def collect_rollouts(
    batch: EnvBatch,
    policy: SharedControlPolicy,
    hyper: PPOHyperparams,
    obs: np.ndarray,
    state: tuple | None,
    rng: np.random.Generator,
    value_norm: ValueNormalizer | None = None,
) -> tuple[RolloutBuffer, np.ndarray, tuple | None]:
    """Collect ``horizon`` steps from every environment.

    Returns the buffer plus the observation/recurrent state to resume from.
    Finished episodes auto-reset inside the batch; their recurrent state is
    zeroed before the next step.
    """
    n, t_max = len(batch), hyper.horizon
    d = batch.obs_dim
    recurrent = policy.spec.lstm is not None
    units = policy.spec.lstm or 0

    buf = RolloutBuffer(
        obs=np.empty((n, t_max, d), dtype=np.float32),
        actions=np.empty((n, t_max, 3), dtype=np.float32),
        log_probs=np.empty((n, t_max), dtype=np.float64),
        values=np.empty((n, t_max), dtype=np.float64),
        rewards=np.empty((n, t_max), dtype=np.float64),
        dones=np.zeros((n, t_max), dtype=bool),
        bootstrap_value=np.zeros(n, dtype=np.float64),
        hidden_h=np.empty((n, t_max, units), dtype=np.float32) if recurrent else None,
        hidden_c=np.empty((n, t_max, units), dtype=np.float32) if recurrent else None,
        phi=np.empty((n, t_max), dtype=np.float64),
        tracking=np.empty((n, t_max), dtype=np.float64),
    )

    log_std = policy.clamped_log_std().detach().cpu().numpy().astype(np.float64)
    std = np.exp(log_std)
    for t in range(t_max):
        buf.obs[:, t] = obs
        if recurrent:
            buf.hidden_h[:, t] = state[0].squeeze(0).numpy()
            buf.hidden_c[:, t] = state[1].squeeze(0).numpy()
        with torch.no_grad():
            mu, value, state = policy(torch.from_numpy(obs), state)
        mu = mu.numpy().astype(np.float64)
        # The raw Gaussian sample is stored for exact ratio math; the
        # environment clamps it into the normalized range on its side.
        actions = mu + std * rng.standard_normal(mu.shape)
        buf.actions[:, t] = actions
        buf.log_probs[:, t] = gaussian_log_prob(actions, mu, log_std)
        v = value.numpy().astype(np.float64)
        buf.values[:, t] = value_norm.denormalize(v) if value_norm else v

        obs, rewards, dones, info = batch.step(actions)
        buf.rewards[:, t] = rewards
        buf.dones[:, t] = dones
        buf.phi[:, t] = info["phi"]
        buf.tracking[:, t] = info["tracking"]
        if recurrent and dones.any():
            keep = torch.from_numpy(~dones).float().reshape(1, n, 1)
            state = (state[0] * keep, state[1] * keep)

    with torch.no_grad():
        _, bootstrap, _ = policy(torch.from_numpy(obs), state)
    bootstrap = bootstrap.numpy().astype(np.float64)
    buf.bootstrap_value = value_norm.denormalize(bootstrap) if value_norm else bootstrap
    return buf, obs, state


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    bootstrap_value: np.ndarray,
    gamma: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Raw (unnormalized) advantages and returns.

    delta_t = r_t + gamma * v_{t+1} * (1 - done_t) - v_t
    A_t = delta_t + gamma * lam * (1 - done_t) * A_{t+1}
    """
    n, t_max = rewards.shape
    adv = np.zeros((n, t_max), dtype=np.float64)
    next_value = bootstrap_value.astype(np.float64)
    carry = np.zeros(n, dtype=np.float64)
    for t in range(t_max - 1, -1, -1):
        not_done = 1.0 - dones[:, t].astype(np.float64)
        delta = rewards[:, t] + gamma * next_value * not_done - values[:, t]
        carry = delta + gamma * lam * not_done * carry
        adv[:, t] = carry
        next_value = values[:, t]
    return adv, adv + values


def clipped_surrogate(ratio: np.ndarray, adv: np.ndarray, eps: float) -> np.ndarray:
    """Per-sample clipped surrogate (to be maximized)."""
    return np.minimum(ratio * adv, np.clip(ratio, 1.0 - eps, 1.0 + eps) * adv)


def iter_minibatches(n_units: int, batch_units: int, mini_epochs: int, rng: np.random.Generator):
    """Yield index arrays covering all units exactly ``mini_epochs`` times."""
    for _ in range(mini_epochs):
        perm = rng.permutation(n_units)
        for lo in range(0, n_units, batch_units):
            yield perm[lo : lo + batch_units]


@dataclass
class UpdateStats:
    policy_loss: float = 0.0
    value_loss: float = 0.0
    entropy: float = 0.0
    clip_fraction: float = 0.0
    batches: int = 0

    def merge(self, policy_loss, value_loss, entropy, clip_fraction):
        self.policy_loss += policy_loss
        self.value_loss += value_loss
        self.entropy += entropy
        self.clip_fraction += clip_fraction
        self.batches += 1

    def mean(self) -> dict:
        b = max(self.batches, 1)
        return {
            "policy_loss": self.policy_loss / b,
            "value_loss": self.value_loss / b,
            "entropy": self.entropy / b,
            "clip_fraction": self.clip_fraction / b,
        }


def _minibatch_loss(policy, mu, value, actions, old_log_probs, adv, returns, hyper):
    """Loss over already-gathered tensors; advantages normalized here."""
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    log_std = policy.clamped_log_std()
    dist = torch.distributions.Normal(mu, log_std.exp().expand_as(mu))
    new_log_probs = dist.log_prob(actions).sum(-1)
    ratio = torch.exp(new_log_probs - old_log_probs)
    surr = torch.minimum(
        ratio * adv, torch.clamp(ratio, 1.0 - hyper.eps_clip, 1.0 + hyper.eps_clip) * adv
    )
    policy_loss = -surr.mean()
    value_loss = torch.nn.functional.mse_loss(value, returns)
    entropy = dist.entropy().sum(-1).mean()
    loss = policy_loss + hyper.value_coef * value_loss - hyper.entropy_coef * entropy
    clip_fraction = ((ratio - 1.0).abs() > hyper.eps_clip).float().mean()
    return loss, policy_loss, value_loss, entropy, clip_fraction


def ppo_update(
    policy: SharedControlPolicy,
    optimizer: torch.optim.Optimizer,
    buf: RolloutBuffer,
    advantages: np.ndarray,
    returns: np.ndarray,
    hyper: PPOHyperparams,
    rng: np.random.Generator,
    value_norm: ValueNormalizer | None = None,
) -> dict:
    """Run ``mini_epochs`` passes of shuffled minibatch updates.

    Non-recurrent policies shuffle flat transitions; recurrent policies
    shuffle fixed-length BPTT chunks whose stored initial hidden states are
    replayed and which zero the state at episode boundaries inside the
    unroll.
    """
    recurrent = policy.spec.lstm is not None
    stats = UpdateStats()
    if value_norm is not None:
        value_norm.update(returns)
        returns = value_norm.normalize(returns)

    if not recurrent:
        n_total = buf.n_transitions
        obs = torch.from_numpy(buf.obs.reshape(n_total, -1))
        actions = torch.from_numpy(buf.actions.reshape(n_total, 3).astype(np.float32))
        old_lp = torch.from_numpy(buf.log_probs.reshape(n_total).astype(np.float32))
        adv_t = torch.from_numpy(advantages.reshape(n_total).astype(np.float32))
        ret_t = torch.from_numpy(returns.reshape(n_total).astype(np.float32))
        for idx_np in iter_minibatches(n_total, hyper.minibatch_size, hyper.mini_epochs, rng):
            idx = torch.from_numpy(idx_np)
            mu, value, _ = policy(obs[idx])
            loss, pl, vl, ent, cf = _minibatch_loss(
                policy, mu, value, actions[idx], old_lp[idx], adv_t[idx], ret_t[idx], hyper
            )
            _apply_update(policy, optimizer, loss, hyper)
            stats.merge(pl.item(), vl.item(), ent.item(), cf.item())
        return stats.mean()

    # recurrent: chunked sequences
    n, t_max = buf.dones.shape
    chunk = hyper.bptt_chunk
    chunks_per_env = t_max // chunk
    n_chunks = n * chunks_per_env
    starts = [(e, c * chunk) for e in range(n) for c in range(chunks_per_env)]
    obs_seq = np.stack([buf.obs[e, s : s + chunk] for e, s in starts])
    act_seq = np.stack([buf.actions[e, s : s + chunk] for e, s in starts]).astype(np.float32)
    lp_seq = np.stack([buf.log_probs[e, s : s + chunk] for e, s in starts]).astype(np.float32)
    adv_seq = np.stack([advantages[e, s : s + chunk] for e, s in starts]).astype(np.float32)
    ret_seq = np.stack([returns[e, s : s + chunk] for e, s in starts]).astype(np.float32)
    h0 = np.stack([buf.hidden_h[e, s] for e, s in starts])
    c0 = np.stack([buf.hidden_c[e, s] for e, s in starts])
    # state is zeroed before consuming step t when the episode ended at t-1
    resets = np.zeros((n_chunks, chunk), dtype=bool)
    for i, (e, s) in enumerate(starts):
        if chunk > 1:
            resets[i, 1:] = buf.dones[e, s : s + chunk - 1]

    batch_chunks = hyper.minibatch_size // chunk
    for idx in iter_minibatches(n_chunks, batch_chunks, hyper.mini_epochs, rng):
        obs_t = torch.from_numpy(obs_seq[idx])
        init = (
            torch.from_numpy(h0[idx]).unsqueeze(0),
            torch.from_numpy(c0[idx]).unsqueeze(0),
        )
        mu, value = policy.forward_sequence(obs_t, init, torch.from_numpy(resets[idx]))
        loss, pl, vl, ent, cf = _minibatch_loss(
            policy,
            mu.reshape(-1, 3),
            value.reshape(-1),
            torch.from_numpy(act_seq[idx]).reshape(-1, 3),
            torch.from_numpy(lp_seq[idx]).reshape(-1),
            torch.from_numpy(adv_seq[idx]).reshape(-1),
            torch.from_numpy(ret_seq[idx]).reshape(-1),
            hyper,
        )
        _apply_update(policy, optimizer, loss, hyper)
        stats.merge(pl.item(), vl.item(), ent.item(), cf.item())
    return stats.mean()


def _apply_update(policy, optimizer, loss, hyper):
    if not torch.isfinite(loss):
        raise TrainingError(f"non-finite loss encountered: {loss.item()!r}")
    optimizer.zero_grad()
    loss.backward()
    nn.utils.clip_grad_norm_(policy.parameters(), hyper.max_grad_norm)
    optimizer.step()


# ---------------------------------------------------------------------------
# Epoch metrics


def _mean_jerk(buf: RolloutBuffer, dt: float, v_max_lin: float, omega_max: float) -> float:
    """Mean jerk magnitude of the commanded velocity over the rollout,
    skipping samples whose central difference spans an episode boundary."""
    scale = np.array([v_max_lin, v_max_lin, omega_max])
    vel = np.clip(buf.actions, -1.0, 1.0) * scale  # (N, T, 3) applied commands
    if vel.shape[1] < 3:
        return 0.0
    j = (vel[:, 2:] - 2 * vel[:, 1:-1] + vel[:, :-2]) / dt**2
    mag = np.linalg.norm(j, axis=2)
    boundary = buf.dones[:, :-2] | buf.dones[:, 1:-1]
    valid = ~boundary
    if not valid.any():
        return 0.0
    return float(mag[valid].mean())


def epoch_metrics(
    buf: RolloutBuffer, stats: EpisodeStats, config: EnvConfig
) -> dict:
    ended = max(stats.ended, 1)
    return {
        "mean_reward": float(buf.rewards.mean()),
        "collision_rate": stats.collisions / ended if stats.ended else 0.0,
        "goal_rate": stats.goals / ended if stats.ended else 0.0,
        "episodes_ended": stats.ended,
        "mean_phi": float(buf.phi.mean()),
        "mean_jerk": _mean_jerk(buf, config.dt, config.v_max_lin, config.omega_max),
        "mean_tracking": float(buf.tracking.mean()),
    }


# ---------------------------------------------------------------------------
# Training driver


@dataclass
class TrainRunConfig:
    seed: int = 0
    arch: str = "FC"
    reward_profile: str = "FC_LFC"
    env_set: str = "abc"
    epochs: int = 300
    out_dir: str = "runs/default"
    checkpoint_every: int = 25
    hyper: PPOHyperparams = field(default_factory=PPOHyperparams)
    env: EnvConfig | None = None  # base config; kind is assigned per env
    # optionally stop adapting the conv encoder after this many epochs,
    # keeping the recurrent core's input distribution fixed
    freeze_lcnn_after: int | None = None


@dataclass
class TrainState:
    policy: SharedControlPolicy
    optimizer: torch.optim.Optimizer
    epoch: int
    sample_rng: np.random.Generator
    shuffle_rng: np.random.Generator
    value_norm: ValueNormalizer = field(default_factory=ValueNormalizer)
    metrics: list[dict] = field(default_factory=list)


def _base_env_config(arch: ArchitectureSpec, env: EnvConfig | None) -> EnvConfig:
    if env is not None:
        if env.lidar.n_rays != arch.n_rays:
            env = replace(env, lidar=LidarSpec(
                n_rays=arch.n_rays,
                min_range=env.lidar.min_range,
                max_range=env.lidar.max_range,
                angle_offset=env.lidar.angle_offset,
            ))
        return env
    return EnvConfig(EnvKind.EMPTY, lidar=LidarSpec(n_rays=arch.n_rays))


def _build_batch_for_epoch(
    epoch: int,
    env_set: list[EnvKind],
    base: EnvConfig,
    weights: RewardWeights,
    hyper: PPOHyperparams,
    seed: int,
) -> EnvBatch:
    kinds = assign_env_kinds(curriculum_schedule(epoch, env_set), hyper.n_envs)
    return make_env_batch(kinds, base, weights, seed)


def _stage_of(epoch: int) -> int:
    from .envs import CURRICULUM_STAGE1_EPOCHS

    return 0 if epoch < CURRICULUM_STAGE1_EPOCHS else 1


def train(
    run: TrainRunConfig,
    weights: RewardWeights,
    *,
    resume_from: str | Path | None = None,
    log_fn=None,
) -> TrainState:
    """Full curriculum training loop; writes checkpoints and a line-delimited
    metrics log under ``run.out_dir``."""
    from .envs import parse_env_set

    out = Path(run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    arch = resolve_architecture(run.arch)
    base = _base_env_config(arch, run.env)
    env_set = parse_env_set(run.env_set)
    hyper = run.hyper

    stage = None
    batch = obs = rec_state = None
    if resume_from is not None:
        state, blob = load_train_state(resume_from, run)
        if blob["stage"] == _stage_of(state.epoch) and blob["env_snapshot"] is not None:
            stage = blob["stage"]
            batch = _build_batch_for_epoch(
                state.epoch, env_set, base, weights, hyper, seed=run.seed + 1000 * stage
            )
            batch.set_state(blob["env_snapshot"])
            obs = blob["obs"]
            rec_state = blob["rec_state"]
    else:
        policy = make_policy(arch, seed=run.seed)
        optimizer = torch.optim.Adam(policy.parameters(), lr=hyper.learning_rate)
        seq = np.random.SeedSequence(run.seed)
        s_rng, m_rng = [np.random.default_rng(c) for c in seq.spawn(2)]
        state = TrainState(policy, optimizer, 0, s_rng, m_rng)

    metrics_path = out / "metrics.jsonl"
    mode = "a" if resume_from is not None else "w"

    with open(metrics_path, mode) as metrics_fh:
        for epoch in range(state.epoch, run.epochs):
            if (
                run.freeze_lcnn_after is not None
                and epoch >= run.freeze_lcnn_after
                and state.policy.lcnn is not None
            ):
                for param in state.policy.lcnn.parameters():
                    param.requires_grad_(False)
            # rebuild the environment batch when the curriculum stage flips
            if batch is None or _stage_of(epoch) != stage:
                stage = _stage_of(epoch)
                batch = _build_batch_for_epoch(
                    epoch, env_set, base, weights, hyper, seed=run.seed + 1000 * stage
                )
                obs = batch.reset_all()
                rec_state = state.policy.initial_state(len(batch))

            t0 = time.perf_counter()
            buf, obs, rec_state = collect_rollouts(
                batch, state.policy, hyper, obs, rec_state, state.sample_rng,
                value_norm=state.value_norm,
            )
            adv, returns = compute_gae(
                buf.rewards, buf.values, buf.dones, buf.bootstrap_value,
                hyper.gamma, hyper.gae_lambda,
            )
            update_stats = ppo_update(
                state.policy, state.optimizer, buf, adv, returns, hyper,
                state.shuffle_rng, value_norm=state.value_norm,
            )
            # wall-clock timing stays out of the record so reruns with the
            # same seed produce byte-identical metric logs
            record = {
                "epoch": epoch,
                **epoch_metrics(buf, batch.pop_stats(), base),
                **update_stats,
            }
            state.metrics.append(record)
            metrics_fh.write(json.dumps(record) + "\n")
            metrics_fh.flush()
            if log_fn is not None:
                log_fn(record, time.perf_counter() - t0)

            state.epoch = epoch + 1
            if run.checkpoint_every and (epoch + 1) % run.checkpoint_every == 0:
                _save_all(out, state, run, stage, batch, obs, rec_state)

    _save_all(out, state, run, stage, batch, obs, rec_state)
    return state


def _save_all(out: Path, state, run: TrainRunConfig, stage, batch, obs, rec_state) -> None:
    save_checkpoint(
        out / "policy.json",
        state.policy,
        meta={
            "epoch": state.epoch,
            "seed": run.seed,
            "arch": run.arch,
            "reward_profile": run.reward_profile,
            "env_set": run.env_set,
        },
    )
    resume = {
        "epoch": state.epoch,
        "stage": stage,
        "optimizer": state.optimizer.state_dict(),
        "policy": state.policy.state_dict(),
        "sample_rng": state.sample_rng.bit_generator.state,
        "shuffle_rng": state.shuffle_rng.bit_generator.state,
        "value_norm": state.value_norm.state_dict(),
        "env_snapshot": batch.get_state() if batch is not None else None,
        "obs": obs,
        "rec_state": rec_state,
        "hyper": asdict(run.hyper),
    }
    torch.save(resume, out / "resume.pt")


def load_train_state(path: str | Path, run: TrainRunConfig) -> tuple[TrainState, dict]:
    path = Path(path)
    blob = torch.load(path if path.is_file() else path / "resume.pt", weights_only=False)
    arch = resolve_architecture(run.arch)
    policy = SharedControlPolicy(arch)
    policy.load_state_dict(blob["policy"])
    optimizer = torch.optim.Adam(policy.parameters(), lr=run.hyper.learning_rate)
    optimizer.load_state_dict(blob["optimizer"])
    s_rng = np.random.default_rng(0)
    s_rng.bit_generator.state = blob["sample_rng"]
    m_rng = np.random.default_rng(0)
    m_rng.bit_generator.state = blob["shuffle_rng"]
    value_norm = ValueNormalizer()
    value_norm.load_state_dict(blob["value_norm"])
    return TrainState(policy, optimizer, blob["epoch"], s_rng, m_rng, value_norm), blob
