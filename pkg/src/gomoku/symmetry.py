"""Dihedral-group transforms for boards, state planes, and policy vectors.

The 8 ops are the 4 counter-clockwise rotations, each optionally preceded
by a horizontal flip (reversal of columns). Cell indexing is row-major from
the top-left everywhere.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .board import Board


class SymmetryOp(Enum):
    """(quarter_turns, flip): flip columns first, then rotate CCW."""

    IDENTITY = (0, False)
    ROT90 = (1, False)
    ROT180 = (2, False)
    ROT270 = (3, False)
    FLIP = (0, True)
    FLIP_ROT90 = (1, True)
    FLIP_ROT180 = (2, True)
    FLIP_ROT270 = (3, True)

    @property
    def quarter_turns(self) -> int:
        return self.value[0]

    @property
    def flipped(self) -> bool:
        return self.value[1]

    @property
    def inverse(self) -> "SymmetryOp":
        k, flip = self.value
        if flip:
            # flip then rot(k) is an involution for every k.
            return self
        return SymmetryOp((-k) % 4, False)


ALL_OPS = tuple(SymmetryOp)
NON_IDENTITY_OPS = tuple(op for op in SymmetryOp if op is not SymmetryOp.IDENTITY)


def transform_grid(grid: np.ndarray, op: SymmetryOp) -> np.ndarray:
    """Apply op to the trailing two axes of an array of square grids."""
    out = grid
    if op.flipped:
        out = np.flip(out, axis=-1)
    if op.quarter_turns:
        out = np.rot90(out, -op.quarter_turns, axes=(-2, -1))
    return np.ascontiguousarray(out)


def transform_cell(cell: int, size: int, op: SymmetryOp) -> int:
    row, col = divmod(cell, size)
    if op.flipped:
        col = size - 1 - col
    for _ in range(op.quarter_turns):
        # quarter turn: (r, c) -> (c, size-1-r), so (0,0) -> (0, size-1)
        row, col = col, size - 1 - row
    return row * size + col


def transform_board(board: Board, op: SymmetryOp) -> Board:
    """Transformed copy; history cells are mapped through the same cell map."""
    out = Board(board.size)
    out.cells = transform_grid(board.cells.reshape(board.size, board.size), op).reshape(-1)
    out.to_move = board.to_move
    out.history = [transform_cell(c, board.size, op) for c in board.history]
    return out


def transform_planes(planes: np.ndarray, op: SymmetryOp) -> np.ndarray:
    return transform_grid(planes, op)


class InvalidDistributionError(ValueError):
    pass


def transform_policy(pi: np.ndarray, op: SymmetryOp) -> np.ndarray:
    """Permute a flat policy vector over size^2 cells to match the cell map."""
    pi = np.asarray(pi, dtype=np.float64)
    size = int(round(np.sqrt(pi.size)))
    if size * size != pi.size:
        raise InvalidDistributionError(f"policy length {pi.size} is not a square")
    if not np.isclose(pi.sum(), 1.0, atol=1e-6) or np.any(pi < 0):
        raise InvalidDistributionError("policy is not a probability distribution")
    return transform_grid(pi.reshape(size, size), op).reshape(-1)


def policy_cell_map(size: int, op: SymmetryOp) -> np.ndarray:
    """dest[transform_cell(i)] = src[i] permutation as an index array."""
    perm = np.empty(size * size, dtype=np.int64)
    for cell in range(size * size):
        perm[transform_cell(cell, size, op)] = cell
    return perm
