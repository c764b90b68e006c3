"""PUCT tree search over Gomoku positions.

One tree, one or more worker threads. Selection walks argmax(Q + U) edges
while pinning virtual loss; leaves are evaluated by the network matching the
side to move (or uniform priors when no networks are given) and expanded;
values are backed up with alternating sign and exponential decay from the
leaf. Finished positions back up -1 (the side to move has just lost) or 0.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .board import Board, Color, GameResult
from .board import encode_state

UNEXPANDED = 0
EXPANDING = 1
EXPANDED = 2
TERMINAL = 3

EXPAND_WAIT_SECONDS = 0.001
EXPAND_WAIT_CHECKS = 50


@dataclass
class SearchConfig:
    c_puct: float = 5.0
    simulations: int = 400
    tau: float = 1.0
    stochastic_plies: int = 6
    gamma: float = 0.95
    virtual_loss: int = 3
    workers: int = 1
    dirichlet_alpha: float = 0.3
    dirichlet_weight: float = 0.0  # 0 disables root noise
    seed: int = 0

    def __post_init__(self):
        if self.simulations < 1:
            raise ValueError("simulations must be >= 1")
        if self.tau < 0:
            raise ValueError("tau must be >= 0 (0 = deterministic)")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")
        if self.workers < 1 or self.virtual_loss < 0:
            raise ValueError("bad concurrency settings")


class Edge:
    __slots__ = ("move", "prior", "visits", "total_value", "vloss", "child")

    def __init__(self, move: int, prior: float):
        self.move = move
        self.prior = prior
        self.visits = 0
        self.total_value = 0.0
        self.vloss = 0
        self.child: Node | None = None

    @property
    def q(self) -> float:
        return self.total_value / self.visits if self.visits > 0 else 0.0


class Node:
    __slots__ = ("board", "player", "status", "edges", "terminal_value", "lock")

    def __init__(self, board: Board):
        self.board = board
        self.player = board.to_move
        self.edges: dict[int, Edge] = {}
        self.lock = threading.Lock()
        result = board.result()
        if result is GameResult.ONGOING:
            self.status = UNEXPANDED
            self.terminal_value = None
        else:
            self.status = TERMINAL
            # The player to move at a decided node has just lost; draws are 0.
            self.terminal_value = -1.0 if result.winner is not None else 0.0


def puct_score(edge: Edge, parent_visit_sum: int, c_puct: float) -> float:
    """Q + U with U = c_puct * P * sqrt(sum_k N_k) / (1 + N). Virtual loss is
    already folded into the edge's N and W."""
    u = c_puct * edge.prior * math.sqrt(parent_visit_sum) / (1 + edge.visits)
    return edge.q + u


def apply_virtual_loss(edge: Edge, amount: int) -> None:
    edge.visits += amount
    edge.total_value -= amount
    edge.vloss += amount


def revert_virtual_loss(edge: Edge, amount: int) -> None:
    if edge.vloss < amount:
        raise RuntimeError("virtual-loss revert without matching apply")
    edge.visits -= amount
    edge.total_value += amount
    edge.vloss -= amount


def select_edge(node: Node, c_puct: float) -> Edge:
    """argmax of puct_score over the node's edges; ties go to the lowest cell."""
    parent_sum = sum(e.visits for e in node.edges.values())
    best, best_score = None, -math.inf
    for move in sorted(node.edges):
        score = puct_score(node.edges[move], parent_sum, c_puct)
        if score > best_score:
            best, best_score = node.edges[move], score
    return best


def backup(path: list[tuple[Node, Edge]], value: float, gamma: float, vloss: int) -> None:
    """Credit a leaf value back up the path.

    The edge whose child is the leaf (distance 0) gets -value; each step
    toward the root flips the sign and decays by gamma. Virtual loss pinned
    during selection is reverted on the same edges.
    """
    sign = -1.0
    decay = 1.0
    for node, edge in reversed(path):
        with node.lock:
            if vloss:
                revert_virtual_loss(edge, vloss)
            edge.visits += 1
            edge.total_value += sign * decay * value
        sign = -sign
        decay *= gamma


def abandon(path: list[tuple[Node, Edge]], vloss: int) -> None:
    for node, edge in reversed(path):
        with node.lock:
            if vloss:
                revert_virtual_loss(edge, vloss)


class UniformEvaluator:
    """Prior-free evaluation: uniform policy, value 0."""

    def evaluate(self, board: Board) -> tuple[np.ndarray, float]:
        n = board.size * board.size
        return np.full(n, 1.0 / n), 0.0


class NetEvaluator:
    """Evaluates each position with the network matching the side to move."""

    def __init__(self, nets):
        self.nets = nets

    def evaluate(self, board: Board) -> tuple[np.ndarray, float]:
        net = self.nets.for_color(board.to_move)
        p, v = net.evaluate(encode_state(board)[None])
        return p[0], float(v[0])


def expand(node: Node, evaluator, rng: np.random.Generator | None = None,
           dirichlet_alpha: float = 0.3, dirichlet_weight: float = 0.0) -> float:
    """Evaluate an unexpanded node, create its edges, return its value.

    Priors are the evaluator's policy masked to legal cells and renormalized;
    if the legal mass is ~0, priors fall back to uniform. The caller must
    have claimed the node (status EXPANDING).
    """
    policy, value = evaluator.evaluate(node.board)
    legal = node.board.legal_moves()
    mass = policy[legal]
    total = mass.sum()
    if total < 1e-12:
        mass = np.full(len(legal), 1.0 / len(legal))
    else:
        mass = mass / total
    if dirichlet_weight > 0 and rng is not None:
        noise = rng.dirichlet([dirichlet_alpha] * len(legal))
        mass = (1 - dirichlet_weight) * mass + dirichlet_weight * noise
    edges = {int(m): Edge(int(m), float(p)) for m, p in zip(legal, mass)}
    with node.lock:
        node.edges = edges
        node.status = EXPANDED
    return value


@dataclass
class EdgeDiagnostics:
    move: int
    visits: int
    q: float
    prior: float


@dataclass
class SearchResult:
    pi: np.ndarray
    chosen: int
    root_value: float
    edges: list[EdgeDiagnostics]
    simulations_run: int
    abandoned: int
    wall_time: float


class SearchAborted(RuntimeError):
    pass


class SearchTree:
    """A reusable tree: search from the root, then advance along the played move."""

    def __init__(self, board: Board, nets=None, config: SearchConfig | None = None):
        self.config = config or SearchConfig()
        self.evaluator = NetEvaluator(nets) if nets is not None else UniformEvaluator()
        self.root = Node(board.copy())
        self.rng = np.random.default_rng(self.config.seed)
        self.abandoned = 0

    # -- simulation ---------------------------------------------------------

    def _child(self, node: Node, edge: Edge) -> Node:
        if edge.child is None:
            with node.lock:
                if edge.child is None:
                    board = node.board.copy()
                    board.play(edge.move)
                    edge.child = Node(board)
        return edge.child

    def _simulate(self) -> bool:
        """One selection/evaluation/backup pass. False = abandoned (retry)."""
        cfg = self.config
        node = self.root
        path: list[tuple[Node, Edge]] = []
        while True:
            if node.status == TERMINAL:
                backup(path, node.terminal_value, cfg.gamma, cfg.virtual_loss)
                return True
            if node.status == EXPANDING:
                for _ in range(EXPAND_WAIT_CHECKS):
                    time.sleep(EXPAND_WAIT_SECONDS)
                    if node.status != EXPANDING:
                        break
                if node.status == EXPANDING:
                    abandon(path, cfg.virtual_loss)
                    self.abandoned += 1
                    return False
                continue
            if node.status == UNEXPANDED:
                with node.lock:
                    claimed = node.status == UNEXPANDED
                    if claimed:
                        node.status = EXPANDING
                if not claimed:
                    continue
                value = expand(node, self.evaluator)
                backup(path, value, cfg.gamma, cfg.virtual_loss)
                return True
            # EXPANDED: descend.
            with node.lock:
                edge = select_edge(node, cfg.c_puct)
                if cfg.virtual_loss:
                    apply_virtual_loss(edge, cfg.virtual_loss)
            path.append((node, edge))
            node = self._child(node, edge)

    def ensure_root_expanded(self) -> None:
        if self.root.status == TERMINAL:
            raise SearchAborted("cannot search a finished position")
        if self.root.status != EXPANDED:
            self.root.status = EXPANDING
            expand(
                self.root,
                self.evaluator,
                rng=self.rng,
                dirichlet_alpha=self.config.dirichlet_alpha,
                dirichlet_weight=self.config.dirichlet_weight,
            )

    def run(self, progress=None) -> SearchResult:
        """Run config.simulations simulations and pick a move.

        `progress`, if given, is called periodically with the number of
        completed simulations.
        """
        cfg = self.config
        start = time.monotonic()
        self.ensure_root_expanded()
        done = 0
        if cfg.workers == 1:
            while done < cfg.simulations:
                if self._simulate():
                    done += 1
                if progress is not None:
                    progress(done)
        else:
            counter_lock = threading.Lock()
            state = {"issued": 0, "done": 0}

            def work():
                while True:
                    # Reserve a simulation slot so exactly config.simulations
                    # complete; abandoned passes retry within the same slot.
                    with counter_lock:
                        if state["issued"] >= cfg.simulations:
                            return
                        state["issued"] += 1
                    while not self._simulate():
                        pass
                    with counter_lock:
                        state["done"] += 1
                        if progress is not None:
                            progress(state["done"])

            threads = [threading.Thread(target=work) for _ in range(cfg.workers)]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            done = state["done"]
        pi = compute_policy(self.root, cfg.tau, self.root.board.size)
        ply = len(self.root.board.history)
        chosen = choose_action(pi, ply, cfg, self.rng)
        diags = [
            EdgeDiagnostics(move=m, visits=e.visits, q=e.q, prior=e.prior)
            for m, e in sorted(self.root.edges.items())
        ]
        return SearchResult(
            pi=pi,
            chosen=chosen,
            root_value=self.root.edges[chosen].q,
            edges=diags,
            simulations_run=done,
            abandoned=self.abandoned,
            wall_time=time.monotonic() - start,
        )

    def advance(self, played: int) -> None:
        """Make the played move's child the new root, keeping its subtree."""
        if self.root.status == EXPANDED:
            if played not in self.root.edges:
                raise KeyError(f"move {played} is not a root edge")
            edge = self.root.edges[played]
            child = self._child(self.root, edge)
        else:
            board = self.root.board.copy()
            board.play(played)
            child = Node(board)
        self.root = child


def compute_policy(root: Node, tau: float, size: int) -> np.ndarray:
    """Visit-count policy: pi_i proportional to N_i^(1/tau) over legal cells;
    tau = 0 gives a one-hot at the most-visited cell (lowest index on ties)."""
    if root.status != EXPANDED:
        raise ValueError("root not expanded")
    moves = sorted(root.edges)
    visits = np.array([root.edges[m].visits for m in moves], dtype=np.float64)
    total = visits.sum()
    if total <= 0:
        raise ValueError("no visits recorded at the root")
    pi = np.zeros(size * size, dtype=np.float64)
    if tau == 0:
        pi[moves[int(np.argmax(visits))]] = 1.0
        return pi
    scaled = (visits / visits.max()) ** (1.0 / tau)
    scaled /= scaled.sum()
    for m, p in zip(moves, scaled):
        pi[m] = p
    return pi


def choose_action(
    pi: np.ndarray, ply_number: int, config: SearchConfig, rng: np.random.Generator
) -> int:
    """Semi-stochastic action choice: sample from pi before the configured
    ply, argmax (lowest index on ties) after."""
    if ply_number < config.stochastic_plies and config.tau > 0:
        return int(rng.choice(len(pi), p=pi))
    return int(np.argmax(pi))


def run_search(
    board: Board, nets=None, config: SearchConfig | None = None, progress=None
) -> SearchResult:
    """Single-shot search on a position (fresh tree, no reuse)."""
    return SearchTree(board, nets=nets, config=config).run(progress=progress)
