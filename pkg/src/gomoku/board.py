"""Free-style Gomoku rules: board state, move application, win/draw detection."""

from __future__ import annotations

from enum import Enum

import numpy as np

WIN_LENGTH = 5

# (drow, dcol) for the four line orientations.
DIRECTIONS = ((0, 1), (1, 0), (1, 1), (1, -1))


class Color(Enum):
    BLACK = 1
    WHITE = 2

    @property
    def opponent(self) -> "Color":
        return Color.WHITE if self is Color.BLACK else Color.BLACK


class GameResult(Enum):
    ONGOING = 0
    BLACK_WIN = 1
    WHITE_WIN = 2
    DRAW = 3

    @property
    def winner(self) -> Color | None:
        if self is GameResult.BLACK_WIN:
            return Color.BLACK
        if self is GameResult.WHITE_WIN:
            return Color.WHITE
        return None


class InvalidConfigError(ValueError):
    pass


class IllegalMoveError(ValueError):
    pass


class Board:
    """Mutable game position.

    Cells are numbered row-major from the top-left: cell = row * size + col.
    Black always moves first.
    """

    EMPTY = 0

    def __init__(self, size: int = 15):
        if size < WIN_LENGTH:
            raise InvalidConfigError(
                f"board size must be at least {WIN_LENGTH}, got {size}"
            )
        self.size = size
        self.cells = np.zeros(size * size, dtype=np.int8)
        self.to_move = Color.BLACK
        self.history: list[int] = []

    @property
    def last_move(self) -> int | None:
        return self.history[-1] if self.history else None

    def rc(self, cell: int) -> tuple[int, int]:
        return divmod(cell, self.size)

    def cell_at(self, row: int, col: int) -> int:
        return row * self.size + col

    def legal_moves(self) -> np.ndarray:
        return np.flatnonzero(self.cells == Board.EMPTY)

    def is_legal(self, cell: int) -> bool:
        return (
            0 <= cell < self.size * self.size
            and self.cells[cell] == Board.EMPTY
            and self.result() is GameResult.ONGOING
        )

    def copy(self) -> "Board":
        b = Board.__new__(Board)
        b.size = self.size
        b.cells = self.cells.copy()
        b.to_move = self.to_move
        b.history = list(self.history)
        return b

    def play(self, cell: int) -> None:
        if not 0 <= cell < self.size * self.size:
            raise IllegalMoveError(f"cell {cell} out of range")
        if self.result() is not GameResult.ONGOING:
            raise IllegalMoveError("game already finished")
        if self.cells[cell] != Board.EMPTY:
            raise IllegalMoveError(f"cell {cell} is occupied")
        self.cells[cell] = self.to_move.value
        self.history.append(cell)
        self.to_move = self.to_move.opponent

    def result(self) -> GameResult:
        """Game status, checking only lines through the last move.

        Sufficient because every earlier position was checked the same way
        when its move was played.
        """
        last = self.last_move
        if last is None:
            return GameResult.ONGOING
        color = self.cells[last]
        row, col = self.rc(last)
        for drow, dcol in DIRECTIONS:
            run = 1
            for sign in (1, -1):
                r, c = row + sign * drow, col + sign * dcol
                while (
                    0 <= r < self.size
                    and 0 <= c < self.size
                    and self.cells[self.cell_at(r, c)] == color
                ):
                    run += 1
                    r += sign * drow
                    c += sign * dcol
            if run >= WIN_LENGTH:
                return (
                    GameResult.BLACK_WIN
                    if color == Color.BLACK.value
                    else GameResult.WHITE_WIN
                )
        if len(self.history) == self.size * self.size:
            return GameResult.DRAW
        return GameResult.ONGOING

    def __repr__(self) -> str:
        glyphs = {0: ".", Color.BLACK.value: "X", Color.WHITE.value: "O"}
        rows = []
        for r in range(self.size):
            rows.append(
                " ".join(glyphs[int(self.cells[self.cell_at(r, c)])] for c in range(self.size))
            )
        return "\n".join(rows)


def scan_result(board: Board) -> GameResult:
    """Full-board result scan, independent of move history.

    Test oracle for Board.result; O(size^2 * 4) per call.
    """
    n = board.size
    for color, win in (
        (Color.BLACK.value, GameResult.BLACK_WIN),
        (Color.WHITE.value, GameResult.WHITE_WIN),
    ):
        for row in range(n):
            for col in range(n):
                for drow, dcol in DIRECTIONS:
                    run = 0
                    r, c = row, col
                    while 0 <= r < n and 0 <= c < n and board.cells[r * n + c] == color:
                        run += 1
                        r += drow
                        c += dcol
                    if run >= WIN_LENGTH:
                        return win
    if np.all(board.cells != Board.EMPTY):
        return GameResult.DRAW
    return GameResult.ONGOING


def encode_state(board: Board) -> np.ndarray:
    """Encode a position as three binary planes, shape (3, size, size).

    Plane 0 marks the stones of the side to move, plane 1 the opponent's
    stones, plane 2 is one-hot at the last move (all zero before the first
    move of a game).
    """
    n = board.size
    own = (board.cells == board.to_move.value).astype(np.float32)
    opp = (board.cells == board.to_move.opponent.value).astype(np.float32)
    last = np.zeros(n * n, dtype=np.float32)
    if board.last_move is not None:
        last[board.last_move] = 1.0
    return np.stack([own.reshape(n, n), opp.reshape(n, n), last.reshape(n, n)])
