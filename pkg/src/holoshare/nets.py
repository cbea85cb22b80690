"""Policy/value network family: an optional circular 1D-conv LiDAR encoder,
an optional LSTM core, a fully connected trunk, and Gaussian action plus
value heads. Checkpoints are versioned JSON documents with little-endian
fp32 weight blobs.
"""

from __future__ import annotations

import base64
import json
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from .obs import ACTION_DIM, EXTRA_OBS_DIM, observation_dim

CHECKPOINT_FORMAT = "holoshare-policy"
CHECKPOINT_VERSION = 1
LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0


class CheckpointError(RuntimeError):
    pass


@dataclass(frozen=True)
class ConvSpec:
    kernel: int
    channels: int
    stride: int


@dataclass(frozen=True)
class ArchitectureSpec:
    name: str
    n_rays: int
    conv1: ConvSpec | None = None
    conv2: ConvSpec | None = None
    fc0: int | None = None
    lstm: int | None = None
    fc1: int = 64
    fc2: int | None = None
    # environment letters the model is meant to train on (a=empty,
    # b=cylinder, c=box, d=door)
    default_env_set: str = "abc"

    def __post_init__(self):
        has_lcnn = self.conv1 is not None
        if has_lcnn != (self.conv2 is not None) or has_lcnn != (self.fc0 is not None):
            raise ValueError("conv1, conv2 and fc0 must be present together")
        if has_lcnn != (self.n_rays == 360):
            raise ValueError("the conv encoder is defined for 360-ray input only")

    @property
    def obs_dim(self) -> int:
        return observation_dim(self.n_rays)


ARCHITECTURES: dict[str, ArchitectureSpec] = {
    "FC": ArchitectureSpec(name="FC", n_rays=36, fc1=64, fc2=64),
    "LFC": ArchitectureSpec(name="LFC", n_rays=36, lstm=128, fc1=64, fc2=64),
    "CLFC": ArchitectureSpec(
        name="CLFC", n_rays=360,
        conv1=ConvSpec(5, 16, 2), conv2=ConvSpec(3, 8, 2), fc0=128, lstm=128, fc1=128,
    ),
    "CLFC_D": ArchitectureSpec(
        name="CLFC_D", n_rays=360,
        conv1=ConvSpec(5, 16, 2), conv2=ConvSpec(3, 8, 2), fc0=128, lstm=128, fc1=128,
        default_env_set="abcd",
    ),
    "SCLFC_D": ArchitectureSpec(
        name="SCLFC_D", n_rays=360,
        conv1=ConvSpec(5, 8, 2), conv2=ConvSpec(3, 4, 2), fc0=64, lstm=64, fc1=64,
        default_env_set="abcd",
    ),
}

_ARCH_ALIASES = {"SCLFC_D_R1": "SCLFC_D", "SCLFC_D_R2": "SCLFC_D"}


def resolve_architecture(name: str) -> ArchitectureSpec:
    key = name.strip()
    key = _ARCH_ALIASES.get(key, key)
    try:
        return ARCHITECTURES[key]
    except KeyError:
        known = sorted(set(ARCHITECTURES) | set(_ARCH_ALIASES))
        raise KeyError(f"unknown architecture {name!r}; known: {', '.join(known)}") from None


def conv_output_length(length: int, conv: ConvSpec) -> int:
    # circular padding of kernel//2 on both sides
    pad = conv.kernel // 2
    return (length + 2 * pad - conv.kernel) // conv.stride + 1


RecurrentState = tuple[torch.Tensor, torch.Tensor]


class SharedControlPolicy(nn.Module):
    """Actor-critic network for one architecture spec.

    ``forward`` handles a single timestep for a batch of environments;
    ``forward_sequence`` unrolls a chunk of timesteps for truncated BPTT,
    zeroing the recurrent state wherever an episode boundary is flagged.
    """

    def __init__(
        self,
        spec: ArchitectureSpec,
        dtype: torch.dtype = torch.float32,
        init_log_std: float = -0.5,
    ):
        super().__init__()
        self.spec = spec
        act = nn.ELU

        if spec.conv1 is not None:
            assert spec.conv2 is not None and spec.fc0 is not None
            flat = conv_output_length(
                conv_output_length(spec.n_rays, spec.conv1), spec.conv2
            ) * spec.conv2.channels
            self.lcnn = nn.Sequential(
                nn.Conv1d(1, spec.conv1.channels, spec.conv1.kernel, spec.conv1.stride,
                          padding=spec.conv1.kernel // 2, padding_mode="circular"),
                act(),
                nn.Conv1d(spec.conv1.channels, spec.conv2.channels, spec.conv2.kernel,
                          spec.conv2.stride, padding=spec.conv2.kernel // 2,
                          padding_mode="circular"),
                act(),
                nn.Flatten(),
                nn.Linear(flat, spec.fc0),
                act(),
            )
            core_in = spec.fc0 + EXTRA_OBS_DIM
        else:
            self.lcnn = None
            core_in = spec.obs_dim

        self.lstm = nn.LSTM(core_in, spec.lstm, batch_first=True) if spec.lstm else None
        trunk_in = spec.lstm if spec.lstm else core_in
        layers: list[nn.Module] = [nn.Linear(trunk_in, spec.fc1), act()]
        if spec.fc2:
            layers += [nn.Linear(spec.fc1, spec.fc2), act()]
        self.trunk = nn.Sequential(*layers)
        head_in = spec.fc2 if spec.fc2 else spec.fc1
        self.mu_head = nn.Linear(head_in, ACTION_DIM)
        self.value_head = nn.Linear(head_in, 1)
        self.log_std = nn.Parameter(torch.full((ACTION_DIM,), float(init_log_std)))

        self._init_weights()
        self.to(dtype)

    def _init_weights(self) -> None:
        for module in self.modules():
            if isinstance(module, (nn.Linear, nn.Conv1d)):
                nn.init.orthogonal_(module.weight, gain=float(np.sqrt(2.0)))
                nn.init.zeros_(module.bias)
        if self.lstm is not None:
            for name, param in self.lstm.named_parameters():
                if "weight_hh" in name:
                    nn.init.orthogonal_(param)
                elif "weight_ih" in name:
                    nn.init.xavier_uniform_(param)
                else:
                    nn.init.zeros_(param)
        nn.init.orthogonal_(self.mu_head.weight, gain=0.01)
        nn.init.zeros_(self.mu_head.bias)
        nn.init.orthogonal_(self.value_head.weight, gain=1.0)
        nn.init.zeros_(self.value_head.bias)

    @property
    def dtype(self) -> torch.dtype:
        return self.mu_head.weight.dtype

    def initial_state(self, batch: int) -> RecurrentState | None:
        if self.lstm is None:
            return None
        units = self.spec.lstm
        h = torch.zeros(1, batch, units, dtype=self.dtype)
        return h, h.clone()

    def clamped_log_std(self) -> torch.Tensor:
        return self.log_std.clamp(LOG_STD_MIN, LOG_STD_MAX)

    def _embed(self, obs: torch.Tensor) -> torch.Tensor:
        if self.lcnn is None:
            return obs
        n = self.spec.n_rays
        lidar = obs[..., :n].reshape(-1, 1, n)
        features = self.lcnn(lidar)
        rest = obs[..., n:].reshape(-1, EXTRA_OBS_DIM)
        return torch.cat([features, rest], dim=-1)

    def forward(
        self, obs: torch.Tensor, state: RecurrentState | None = None
    ) -> tuple[torch.Tensor, torch.Tensor, RecurrentState | None]:
        """One timestep: obs (B, obs_dim) -> action mean (B, 3), value (B,)."""
        x = self._embed(obs)
        if self.lstm is not None:
            if state is None:
                state = self.initial_state(obs.shape[0])
            x, state = self.lstm(x.unsqueeze(1), state)
            x = x.squeeze(1)
        x = self.trunk(x)
        mu = torch.tanh(self.mu_head(x))
        value = self.value_head(x).squeeze(-1)
        return mu, value, state

    def forward_sequence(
        self,
        obs: torch.Tensor,
        init_state: RecurrentState | None,
        resets: torch.Tensor | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Unroll a chunk: obs (B, T, obs_dim) -> mu (B, T, 3), value (B, T).

        ``resets[:, t]`` marks environments whose episode restarted before
        consuming step t; their recurrent state is zeroed mid-sequence so
        gradients never flow across an episode boundary.
        """
        b, t, _ = obs.shape
        if self.lstm is None:
            flat = obs.reshape(b * t, -1)
            mu, value, _ = self.forward(flat)
            return mu.reshape(b, t, ACTION_DIM), value.reshape(b, t)
        state = init_state if init_state is not None else self.initial_state(b)
        mus, values = [], []
        for i in range(t):
            if resets is not None:
                keep = (~resets[:, i]).to(self.dtype).reshape(1, b, 1)
                state = (state[0] * keep, state[1] * keep)
            x = self._embed(obs[:, i])
            x, state = self.lstm(x.unsqueeze(1), state)
            x = self.trunk(x.squeeze(1))
            mus.append(torch.tanh(self.mu_head(x)))
            values.append(self.value_head(x).squeeze(-1))
        return torch.stack(mus, dim=1), torch.stack(values, dim=1)


def make_policy(
    arch: str | ArchitectureSpec, seed: int | None = None, dtype: torch.dtype = torch.float32
) -> SharedControlPolicy:
    spec = resolve_architecture(arch) if isinstance(arch, str) else arch
    if seed is not None:
        torch.manual_seed(seed)
    return SharedControlPolicy(spec, dtype=dtype)


# ---------------------------------------------------------------------------
# Checkpoint IO


def _spec_to_dict(spec: ArchitectureSpec) -> dict:
    return asdict(spec)


def _spec_from_dict(data: dict) -> ArchitectureSpec:
    conv1 = ConvSpec(**data["conv1"]) if data.get("conv1") else None
    conv2 = ConvSpec(**data["conv2"]) if data.get("conv2") else None
    return ArchitectureSpec(
        name=data["name"],
        n_rays=data["n_rays"],
        conv1=conv1,
        conv2=conv2,
        fc0=data.get("fc0"),
        lstm=data.get("lstm"),
        fc1=data["fc1"],
        fc2=data.get("fc2"),
        default_env_set=data.get("default_env_set", "abc"),
    )


def save_checkpoint(path, policy: SharedControlPolicy, meta: dict | None = None) -> None:
    tensors = {}
    for name, tensor in policy.state_dict().items():
        arr = tensor.detach().cpu().numpy().astype("<f4")
        tensors[name] = {
            "shape": list(arr.shape),
            "data": base64.b64encode(arr.tobytes()).decode("ascii"),
        }
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "architecture": _spec_to_dict(policy.spec),
        "dtype": "<f4",
        "tensors": tensors,
        "log_std": policy.clamped_log_std().detach().cpu().numpy().tolist(),
        "meta": meta or {},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path, dtype: torch.dtype = torch.float32) -> tuple[SharedControlPolicy, dict]:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"not a policy checkpoint: {path}")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {doc.get('version')}")
    spec = _spec_from_dict(doc["architecture"])
    policy = SharedControlPolicy(spec, dtype=dtype)
    state = policy.state_dict()
    loaded = {}
    for name, tensor in state.items():
        entry = doc["tensors"].get(name)
        if entry is None:
            raise CheckpointError(f"checkpoint missing tensor {name!r}")
        shape = tuple(entry["shape"])
        if shape != tuple(tensor.shape):
            raise CheckpointError(
                f"shape mismatch for {name!r}: checkpoint {shape}, model {tuple(tensor.shape)}"
            )
        flat = np.frombuffer(base64.b64decode(entry["data"]), dtype="<f4")
        if flat.size != int(np.prod(shape, dtype=np.int64)):
            raise CheckpointError(f"data size mismatch for {name!r}")
        loaded[name] = torch.from_numpy(flat.reshape(shape).copy()).to(dtype)
    extra = set(doc["tensors"]) - set(state)
    if extra:
        raise CheckpointError(f"checkpoint has unexpected tensors: {sorted(extra)}")
    policy.load_state_dict(loaded)
    return policy, doc.get("meta", {})
