"""Residual convolutional policy-value network.

One network maps the 3-plane board encoding to a move distribution over all
cells plus a scalar winning value in [-1, 1] for the side to move. Two
instances are kept in play (one per stone color); pairing lives in NetPair.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .board import Color, GameResult

LOG_CLAMP = -30.0
BN_RUNNING_MOMENTUM = 0.99  # running = 0.99 * running + 0.01 * batch


@dataclass
class NetworkConfig:
    board_size: int = 15
    tower_filters: int = 32
    residual_blocks: int = 2
    value_hidden: int = 32
    l2_coefficient: float = 1e-4
    learning_rate: float = 0.01
    lr_milestones: tuple[int, ...] = (100_000, 200_000)
    lr_decay: float = 0.1
    momentum_coefficient: float = 0.9
    batch_size: int = 32

    def __post_init__(self):
        for name in (
            "board_size",
            "tower_filters",
            "residual_blocks",
            "value_hidden",
            "learning_rate",
            "momentum_coefficient",
            "batch_size",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.l2_coefficient < 0:
            raise ValueError("l2_coefficient must be non-negative")

    @property
    def policy_dim(self) -> int:
        return self.board_size * self.board_size

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lr_milestones"] = list(self.lr_milestones)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        d = dict(d)
        if "lr_milestones" in d:
            d["lr_milestones"] = tuple(d["lr_milestones"])
        return cls(**d)


@dataclass
class TrainingSample:
    planes: np.ndarray  # (3, N, N) float32
    pi: np.ndarray  # (N*N,) float32, sums to 1
    z: float  # in [-1, 1]
    mover: Color | None = None


class _ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.bn1 = nn.BatchNorm2d(channels, momentum=1.0 - BN_RUNNING_MOMENTUM)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)
        self.bn2 = nn.BatchNorm2d(channels, momentum=1.0 - BN_RUNNING_MOMENTUM)

    def forward(self, x):
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return F.relu(out + x)


class PolicyValueNet(nn.Module):
    """Entry conv, residual tower, then 1x1-conv policy and value heads."""

    def __init__(self, config: NetworkConfig, seed: int = 0):
        super().__init__()
        self.config = config
        n, ch = config.board_size, config.tower_filters
        torch.manual_seed(seed)
        self.entry_conv = nn.Conv2d(3, ch, 3, padding=1)
        self.entry_bn = nn.BatchNorm2d(ch, momentum=1.0 - BN_RUNNING_MOMENTUM)
        self.blocks = nn.ModuleList(
            _ResidualBlock(ch) for _ in range(config.residual_blocks)
        )
        self.policy_conv = nn.Conv2d(ch, 2, 1)
        self.policy_bn = nn.BatchNorm2d(2, momentum=1.0 - BN_RUNNING_MOMENTUM)
        self.policy_fc = nn.Linear(2 * n * n, n * n)
        self.value_conv = nn.Conv2d(ch, 1, 1)
        self.value_bn = nn.BatchNorm2d(1, momentum=1.0 - BN_RUNNING_MOMENTUM)
        self.value_fc1 = nn.Linear(n * n, config.value_hidden)
        self.value_fc2 = nn.Linear(config.value_hidden, 1)
        # SGD momentum buffers, one per parameter.
        self._velocity = {
            name: torch.zeros_like(p) for name, p in self.named_parameters()
        }
        self._step_count = 0

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns (log_p of shape (B, N*N), v of shape (B,))."""
        out = F.relu(self.entry_bn(self.entry_conv(x)))
        for block in self.blocks:
            out = block(out)
        p = F.relu(self.policy_bn(self.policy_conv(out)))
        log_p = F.log_softmax(self.policy_fc(p.flatten(1)), dim=1)
        v = F.relu(self.value_bn(self.value_conv(out)))
        v = F.relu(self.value_fc1(v.flatten(1)))
        v = torch.tanh(self.value_fc2(v)).squeeze(1)
        return log_p, v

    @torch.no_grad()
    def evaluate(self, planes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Inference on a batch of encoded positions, shape (B, 3, N, N).

        Returns (p, v): probabilities (B, N*N) and values (B,), as float64.
        Uses running batch-norm statistics; safe for concurrent callers.
        """
        was_training = self.training
        self.eval()
        try:
            x = torch.from_numpy(np.ascontiguousarray(planes, dtype=np.float32))
            log_p, v = self.forward(x)
            return (
                log_p.exp().double().numpy(),
                v.double().numpy(),
            )
        finally:
            self.train(was_training)

    def loss_terms(
        self, batch: list[TrainingSample]
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
        """(total, value_term, policy_term, l2_term) on the current mode's
        batch-norm statistics.

        total = mean (z - v)^2 - mean sum_i pi_i log p_i + c * sum weights^2,
        with log p clamped below at LOG_CLAMP and the L2 penalty covering
        conv/dense weights only.
        """
        if not batch:
            raise ValueError("empty batch")
        x = torch.from_numpy(np.stack([s.planes for s in batch]).astype(np.float32))
        pi = torch.from_numpy(np.stack([s.pi for s in batch]).astype(np.float32))
        z = torch.tensor([s.z for s in batch], dtype=torch.float32)
        log_p, v = self.forward(x)
        value_term = ((z - v) ** 2).mean()
        policy_term = -(pi * log_p.clamp(min=LOG_CLAMP)).sum(dim=1).mean()
        l2_term = sum(
            (m.weight**2).sum() for m in self.modules() if isinstance(m, (nn.Conv2d, nn.Linear))
        )
        l2_term = self.config.l2_coefficient * l2_term
        return value_term + policy_term + l2_term, value_term, policy_term, l2_term


@dataclass
class StepReport:
    total: float
    value_term: float
    policy_term: float
    l2_term: float
    learning_rate: float


def current_lr(config: NetworkConfig, step_count: int) -> float:
    lr = config.learning_rate
    for m in config.lr_milestones:
        if step_count >= m:
            lr *= config.lr_decay
    return lr


def train_step(net: PolicyValueNet, batch: list[TrainingSample]) -> StepReport:
    """One SGD-with-momentum update:

    velocity <- momentum * velocity - lr * grad;  param <- param + velocity.
    Batch statistics drive the forward pass; running stats are updated.
    """
    net.train()
    net.zero_grad(set_to_none=True)
    total, value_term, policy_term, l2_term = net.loss_terms(batch)
    total.backward()
    lr = current_lr(net.config, net._step_count)
    momentum = net.config.momentum_coefficient
    with torch.no_grad():
        for name, p in net.named_parameters():
            if p.grad is None:
                continue
            if not torch.isfinite(p.grad).all():
                raise FloatingPointError(f"non-finite gradient in {name}")
            vel = net._velocity[name]
            vel.mul_(momentum).add_(p.grad, alpha=-lr)
            p.add_(vel)
    net._step_count += 1
    return StepReport(
        total=float(total), value_term=float(value_term),
        policy_term=float(policy_term), l2_term=float(l2_term), learning_rate=lr,
    )


def label_values(
    game_moves: list[tuple[np.ndarray, np.ndarray, Color]],
    result: GameResult,
    gamma: float = 1.0,
) -> list[TrainingSample]:
    """Attach game-outcome value targets to per-move (planes, pi, mover) records.

    The sample at ply t of a T-ply game gets z = base * gamma^(T-1-t) where
    base is +1/-1/0 for mover win/loss/draw, so late moves keep full credit
    and early moves are discounted.
    """
    if result is GameResult.ONGOING:
        raise ValueError("game not finished")
    if not 0 < gamma <= 1:
        raise ValueError("gamma must be in (0, 1]")
    winner = result.winner
    total = len(game_moves)
    samples = []
    for t, (planes, pi, mover) in enumerate(game_moves):
        if winner is None:
            base = 0.0
        else:
            base = 1.0 if mover is winner else -1.0
        samples.append(
            TrainingSample(
                planes=planes, pi=pi, z=base * gamma ** (total - 1 - t), mover=mover
            )
        )
    return samples


@dataclass
class NetPair:
    """The two live networks: one learns black's moves, one white's."""

    black: PolicyValueNet
    white: PolicyValueNet

    def for_color(self, color: Color) -> PolicyValueNet:
        return self.black if color is Color.BLACK else self.white

    @classmethod
    def fresh(cls, config: NetworkConfig, seed: int = 0) -> "NetPair":
        return cls(
            black=PolicyValueNet(config, seed=seed),
            white=PolicyValueNet(config, seed=seed + 1),
        )

    def clone(self) -> "NetPair":
        import copy

        return NetPair(black=copy.deepcopy(self.black), white=copy.deepcopy(self.white))
