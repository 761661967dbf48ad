"""Define-by-run recording of tensor operations."""

from __future__ import annotations

import contextvars
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Sequence

import numpy as np

from .core import Tensor

LEAF = "leaf"


@dataclass
class Node:
    """One recorded value: a leaf or the output of an op."""

    nid: int
    op: str
    inputs: tuple
    attrs: Dict[str, Any] = field(default_factory=dict)
    value: Optional[np.ndarray] = None
    needs_grad: bool = False

    @property
    def is_leaf(self) -> bool:
        return self.op == LEAF


@dataclass(frozen=True)
class _RecordState:
    tape: Optional["Tape"]
    enabled: bool


_STATE: contextvars.ContextVar[_RecordState] = contextvars.ContextVar(
    "discrete_energy_tape_state", default=_RecordState(None, False)
)


def current_tape() -> Optional["Tape"]:
    """Return the tape that receives new ops, or ``None`` when not recording."""
    state = _STATE.get()
    return state.tape if state.enabled else None


@contextmanager
def no_record() -> Iterator[None]:
    """Evaluate ops as plain array math."""
    token = _STATE.set(_RecordState(_STATE.get().tape, False))
    try:
        yield
    finally:
        _STATE.reset(token)


@contextmanager
def recording(tape: "Tape") -> Iterator["Tape"]:
    """Make ``tape`` active even inside a ``no_record`` block."""
    token = _STATE.set(_RecordState(tape, True))
    try:
        yield tape
    finally:
        _STATE.reset(token)


class Tape:
    """Ordered record of nodes; inputs of a node always precede it.

    A tape is single-owner. Tensors produced on a tape remember their node;
    tensors from elsewhere (parameters, data) become leaves the first time a
    recorded op touches them.
    """

    def __init__(self, name: str = "") -> None:
        self.name = name
        self.nodes: List[Node] = []
        self._tensors: List[Tensor] = []
        self._leaf_index: Dict[int, int] = {}
        self._tokens: List[contextvars.Token] = []

    def __enter__(self) -> "Tape":
        self._tokens.append(_STATE.set(_RecordState(self, True)))
        return self

    def __exit__(self, *exc: Any) -> None:
        _STATE.reset(self._tokens.pop())

    def __len__(self) -> int:
        return len(self.nodes)

    def __repr__(self) -> str:
        return f"Tape(name={self.name!r}, nodes={len(self.nodes)})"

    def node_of(self, tensor: Tensor) -> Optional[int]:
        if tensor._tape is self:
            return tensor._nid
        return self._leaf_index.get(id(tensor))

    def tensor(self, nid: int) -> Tensor:
        return self._tensors[nid]

    def is_tracked(self, tensor: Tensor) -> bool:
        return tensor.requires_grad or self.node_of(tensor) is not None

    def track(self, tensor: Tensor) -> int:
        """Register ``tensor`` so ops on it are recorded; no gradient requested."""
        nid = self.node_of(tensor)
        if nid is None:
            nid = self._add_leaf(tensor, tensor.requires_grad)
        return nid

    def watch(self, tensor: Tensor) -> Tensor:
        """Register ``tensor`` and request its gradient."""
        nid = self.node_of(tensor)
        if nid is None:
            self._add_leaf(tensor, True)
        else:
            self.nodes[nid].needs_grad = True
        return tensor

    def _add_leaf(self, tensor: Tensor, needs_grad: bool) -> int:
        nid = len(self.nodes)
        self.nodes.append(Node(nid, LEAF, (), {}, tensor.data, needs_grad))
        self._tensors.append(tensor)
        self._leaf_index[id(tensor)] = nid
        return nid

    def record(self, op: str, inputs: Sequence[Tensor], attrs: Dict[str, Any], out: Tensor) -> Node:
        ids = tuple(self.track(t) for t in inputs)
        needs = any(self.nodes[i].needs_grad for i in ids)
        node = Node(len(self.nodes), op, ids, attrs, out.data, needs)
        self.nodes.append(node)
        self._tensors.append(out)
        out._tape = self
        out._nid = node.nid
        return node

    def replay(self) -> List[np.ndarray]:
        """Recompute every op node from the stored leaf values."""
        from .ops import OPS

        values: List[np.ndarray] = []
        for node in self.nodes:
            if node.is_leaf:
                values.append(node.value)
                continue
            op = OPS[node.op]
            with np.errstate(all="ignore"):
                out = op.forward([values[i] for i in node.inputs], **node.attrs)
            values.append(np.asarray(out, dtype=node.value.dtype))
        return values
