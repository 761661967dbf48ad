"""Reverse-mode differentiation over a recorded tape."""

from __future__ import annotations

import logging
from contextlib import nullcontext
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple, Union

from .core import NonScalarRootError, ShapeMismatchError, Tensor
from .ops import VjpContext, add, op_registry, zeros_like
from .tape import Tape, current_tape, no_record, recording

logger = logging.getLogger(__name__)


class GradMap:
    """Gradients of one root, keyed by node id on the tape that recorded it."""

    def __init__(self, tape: Optional[Tape], grads: Dict[int, Tensor]) -> None:
        self.tape = tape
        self._grads = grads

    def _nid(self, key: Union[int, Tensor]) -> Optional[int]:
        if isinstance(key, int):
            return key
        if self.tape is None:
            return None
        return self.tape.node_of(key)

    def __contains__(self, key: Union[int, Tensor]) -> bool:
        nid = self._nid(key)
        return nid is not None and nid in self._grads

    def __getitem__(self, key: Union[int, Tensor]) -> Tensor:
        nid = self._nid(key)
        if nid is None or nid not in self._grads:
            raise KeyError(key)
        return self._grads[nid]

    def __len__(self) -> int:
        return len(self._grads)

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self._grads))

    def get(self, key: Union[int, Tensor], default: Optional[Tensor] = None) -> Optional[Tensor]:
        try:
            return self[key]
        except KeyError:
            return default

    def wrt(self, tensor: Tensor) -> Tensor:
        """Gradient with respect to ``tensor``; zeros when it does not reach the root."""
        found = self.get(tensor)
        return found if found is not None else zeros_like(tensor)

    def items(self) -> List[Tuple[int, Tensor]]:
        return [(nid, self._grads[nid]) for nid in sorted(self._grads)]


def _dependents(tape: Tape, sources: Set[int], stop: int) -> Set[int]:
    reached = set(sources)
    start = min(sources) if sources else stop + 1
    for node in tape.nodes[start : stop + 1]:
        if not node.is_leaf and any(i in reached for i in node.inputs):
            reached.add(node.nid)
    return reached


def backward(
    root: Tensor,
    *,
    create_graph: bool = False,
    wrt: Optional[Sequence[Tensor]] = None,
) -> GradMap:
    """Propagate d(root)/d(node) to every node that needs a gradient.

    With ``create_graph`` the vjp ops are recorded on the same tape, which
    makes the returned gradients differentiable. ``wrt`` restricts the sweep
    to paths that reach the given tensors.
    """
    if root.size != 1:
        raise NonScalarRootError(f"backward needs a single-entry root, got shape {root.shape}")
    tape = root._tape
    if tape is None:
        return GradMap(None, {})
    root_id = root._nid
    assert root_id is not None

    allowed: Optional[Set[int]] = None
    if wrt is not None:
        sources = {nid for nid in (tape.node_of(t) for t in wrt) if nid is not None}
        allowed = _dependents(tape, sources, root_id)

    grads: Dict[int, Tensor] = {root_id: Tensor.ones(root.shape, root.precision)}
    scope = recording(tape) if create_graph else no_record()
    with scope:
        for nid in range(root_id, -1, -1):
            g = grads.get(nid)
            node = tape.nodes[nid]
            if g is None or node.is_leaf:
                continue
            if allowed is None:
                needs = tuple(tape.nodes[i].needs_grad for i in node.inputs)
            else:
                needs = tuple(i in allowed for i in node.inputs)
            if not any(needs):
                continue
            ctx = VjpContext(
                inputs=tuple(tape.tensor(i) for i in node.inputs),
                output=tape.tensor(nid),
                attrs=node.attrs,
            )
            input_grads = op_registry.get(node.op).vjp(ctx, g, needs)
            for i, flag, gi in zip(node.inputs, needs, input_grads):
                if not flag or gi is None:
                    continue
                if gi.shape != tape.nodes[i].value.shape:
                    raise ShapeMismatchError(f"vjp of {node.op} returned {gi.shape}, expected {tape.nodes[i].value.shape}")
                previous = grads.get(i)
                grads[i] = gi if previous is None else add(previous, gi)
    return GradMap(tape, grads)


def grad(
    root_fn,
    inputs: Sequence[Tensor],
    *,
    create_graph: bool = False,
) -> Tuple[Tensor, List[Tensor]]:
    """Evaluate ``root_fn(*inputs)`` and return it with its gradients.

    Records on the active tape when ``create_graph`` is set and a tape is
    active; otherwise a private tape is used.
    """
    active = current_tape()
    tape = active if (create_graph and active is not None) else Tape("grad")
    scope = nullcontext() if tape is active else recording(tape)
    with scope:
        for tensor in inputs:
            tape.watch(tensor)
        root = root_fn(*inputs)
        grads = backward(root, create_graph=create_graph, wrt=list(inputs))
    return root, [grads.wrt(t) for t in inputs]


def gradients(root: Tensor, params: Iterable[Tensor]) -> List[Tensor]:
    """Convenience wrapper returning plain gradients for ``params``."""
    grads = backward(root)
    return [grads.wrt(p) for p in params]
