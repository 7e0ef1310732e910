"""Model graphs: build, static shape inference, forward/backward, weights I/O.

A model is a DAG of named layer nodes over one or more named inputs.  Nodes
may fan out; gradients from multiple consumers are summed.  Parameters are
addressed as ``node/param`` and keep a stable order (declaration order, then
the layer's own parameter order), which the weights file relies on.
"""

from __future__ import annotations

import heapq
import io
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .container import read_records, write_records
from .errors import FormatError, GraphError, ShapeError, StateError
from .layers.base import Layer
from .tensor import Tensor, as_array

WEIGHTS_MAGIC = b"TSDLW1\x00"


@dataclass
class NodeSpec:
    name: str
    layer: Layer
    inputs: list[str] = field(default_factory=list)


class Model:
    """An executable layer DAG.  Construct through :func:`build`."""

    def __init__(self, input_names, input_shapes, nodes, order, shapes, output):
        self.input_names: list[str] = input_names
        self.input_shapes: dict[str, tuple[int, ...]] = input_shapes
        self.nodes: dict[str, NodeSpec] = nodes
        self.order: list[str] = order  # topological evaluation order
        self.node_shapes: dict[str, tuple[int, ...]] = shapes
        self.output: str = output
        self._ctx: Optional[dict] = None
        self.last_input_grads: Optional[dict[str, np.ndarray]] = None

    # -- introspection -------------------------------------------------------

    @property
    def output_shape(self) -> tuple[int, ...]:
        return self.node_shapes[self.output]

    def parameters(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for name in self.order:
            for pname, p in self.nodes[name].layer.params.items():
                out[f"{name}/{pname}"] = p
        return out

    def buffers(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for name in self.order:
            for bname, b in self.nodes[name].layer.buffers.items():
                out[f"{name}/{bname}"] = b
        return out

    def state(self) -> dict[str, np.ndarray]:
        """Parameters followed by buffers, in stable order."""
        out = self.parameters()
        out.update(self.buffers())
        return out

    def param_count(self) -> int:
        return int(sum(p.size for p in self.parameters().values()))

    def kind_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for name in self.order:
            kind = self.nodes[name].layer.kind
            counts[kind] = counts.get(kind, 0) + 1
        return counts

    # -- execution -----------------------------------------------------------

    def _coerce_inputs(self, x) -> dict[str, np.ndarray]:
        if isinstance(x, dict):
            arrays = {k: as_array(v) for k, v in x.items()}
        elif isinstance(x, (list, tuple)):
            arrays = {n: as_array(v) for n, v in zip(self.input_names, x)}
        else:
            arrays = {self.input_names[0]: as_array(x)}
        if sorted(arrays) != sorted(self.input_names):
            raise ShapeError(
                f"model needs inputs {self.input_names}, got {sorted(arrays)}"
            )
        for name, a in arrays.items():
            want = self.input_shapes[name]
            if a.ndim != len(want) + 1 or tuple(a.shape[1:]) != want:
                raise ShapeError(
                    f"input {name!r} must be [batch, {', '.join(map(str, want))}], "
                    f"got {a.shape}"
                )
        return arrays

    def forward(self, x, train: bool = False) -> Tensor:
        """Evaluate the graph.  In training mode, caches for backward are kept."""
        values = self._coerce_inputs(x)
        caches: dict[str, dict] = {}
        for name in self.order:
            node = self.nodes[name]
            xs = [values[i] for i in node.inputs]
            cache: Optional[dict] = {} if train else None
            arg = xs if node.layer.n_inputs > 1 else xs[0]
            values[name] = node.layer.forward(arg, train, cache)
            if train:
                caches[name] = cache
        out = values[self.output]
        if train:
            self._ctx = {"caches": caches, "batch": out.shape[0]}
        return Tensor(out)

    def backward(self, loss_grad) -> dict[str, np.ndarray]:
        """Back-propagate from the output; returns gradients per parameter name.

        Requires a preceding training-mode ``forward``.  The cache is consumed.
        Gradients with respect to the graph inputs are kept on
        ``last_input_grads``.
        """
        if self._ctx is None:
            raise StateError("backward requires a prior training-mode forward")
        ctx, self._ctx = self._ctx, None
        caches = ctx["caches"]
        upstream: dict[str, np.ndarray] = {self.output: as_array(loss_grad)}
        grads: dict[str, np.ndarray] = {}
        for name in reversed(self.order):
            node = self.nodes[name]
            up = upstream.pop(name, None)
            if up is None:
                # node feeds nothing on the path to the output
                for pname, p in node.layer.params.items():
                    grads[f"{name}/{pname}"] = np.zeros_like(p)
                continue
            in_grads, pgrads = node.layer.backward(up, caches[name])
            for pname, p in node.layer.params.items():
                grads[f"{name}/{pname}"] = pgrads.get(pname, np.zeros_like(p))
            if node.layer.n_inputs == 1:
                in_grads = [in_grads]
            for src, g in zip(node.inputs, in_grads):
                if src in upstream:
                    upstream[src] = upstream[src] + g
                else:
                    upstream[src] = g
        self.last_input_grads = {
            name: upstream.get(name, np.zeros((ctx["batch"], *self.input_shapes[name])))
            for name in self.input_names
        }
        return grads

    # -- weights I/O -----------------------------------------------------------

    def save_weights(self, sink: Union[str, io.IOBase]):
        """Write all parameters and buffers as float32 with a trailing CRC32.

        The live values are rounded to the stored float32 grid, so the model
        in memory and the file agree exactly after a save.
        """
        state = self.state()
        for arr in state.values():
            arr[...] = arr.astype(np.float32)
        write_records(WEIGHTS_MAGIC, state, sink)

    def load_weights(self, source: Union[str, io.IOBase]):
        """Read a weights file and copy values into this model in place.

        The file's entry list must match this model's parameter/buffer
        manifest exactly (names, order, shapes).
        """
        entries = read_records(WEIGHTS_MAGIC, source)
        want = self.state()
        got_names = list(entries)
        want_names = list(want)
        for i in range(max(len(got_names), len(want_names))):
            if i >= len(got_names):
                raise FormatError(f"weights file is missing parameter {want_names[i]!r}")
            if i >= len(want_names):
                raise FormatError(f"weights file has extra parameter {got_names[i]!r}")
            if got_names[i] != want_names[i]:
                raise FormatError(
                    f"manifest mismatch at entry {i}: file has {got_names[i]!r}, "
                    f"model expects {want_names[i]!r}"
                )
            if entries[got_names[i]].shape != want[want_names[i]].shape:
                raise FormatError(
                    f"shape mismatch for {got_names[i]!r}: file has "
                    f"{entries[got_names[i]].shape}, model expects "
                    f"{want[want_names[i]].shape}"
                )
        for name, arr in entries.items():
            want[name][...] = arr.astype(np.float64)


def build(
    inputs: dict[str, Sequence[int]],
    nodes: Sequence[NodeSpec],
    output: Optional[str] = None,
    seed: int = 0,
) -> Model:
    """Validate a node list, infer shapes, initialise weights, return a Model.

    ``inputs`` maps entry names to per-sample shapes.  Node evaluation order
    is the stable topological order (declaration order among ready nodes).
    A cycle or a reference to an undeclared name raises GraphError.
    """
    if not inputs:
        raise GraphError("a model needs at least one input")
    input_names = list(inputs)
    input_shapes = {k: tuple(int(e) for e in v) for k, v in inputs.items()}
    node_map: dict[str, NodeSpec] = {}
    for spec in nodes:
        if spec.name in node_map or spec.name in input_shapes:
            raise GraphError(f"duplicate node name {spec.name!r}")
        node_map[spec.name] = spec
    known = set(input_names) | set(node_map)
    for spec in nodes:
        if not spec.inputs:
            raise GraphError(f"node {spec.name!r} has no inputs")
        for ref in spec.inputs:
            if ref not in known:
                raise GraphError(f"node {spec.name!r} references unknown node {ref!r}")

    # Kahn's algorithm; ties resolved by declaration index, so the
    # evaluation order is deterministic for a given spec.
    decl = {name: i for i, name in enumerate(node_map)}
    deps = {name: {r for r in spec.inputs if r in node_map}
            for name, spec in node_map.items()}
    consumers: dict[str, set[str]] = {name: set() for name in node_map}
    for name, ds in deps.items():
        for d in ds:
            consumers[d].add(name)
    remaining = {name: len(ds) for name, ds in deps.items()}
    ready = [decl[name] for name, n in remaining.items() if n == 0]
    heapq.heapify(ready)
    names_by_decl = list(node_map)
    order: list[str] = []
    while ready:
        name = names_by_decl[heapq.heappop(ready)]
        order.append(name)
        for consumer in consumers[name]:
            remaining[consumer] -= 1
            if remaining[consumer] == 0:
                heapq.heappush(ready, decl[consumer])
    if len(order) != len(node_map):
        stuck = sorted(set(node_map) - set(order))
        raise GraphError(f"graph has a cycle involving {stuck}")

    shapes: dict[str, tuple[int, ...]] = dict(input_shapes)
    seq = np.random.SeedSequence(seed)
    child_seeds = seq.spawn(len(order))
    for child, name in zip(child_seeds, order):
        spec = node_map[name]
        in_shapes = [shapes[r] for r in spec.inputs]
        try:
            shapes[name] = spec.layer.out_shape(in_shapes)
            spec.layer.bind(in_shapes, np.random.default_rng(child))
        except ShapeError as exc:
            raise ShapeError(f"node {name!r}: {exc}") from None

    if output is None:
        output = order[-1] if order else input_names[0]
    if output not in shapes:
        raise GraphError(f"output {output!r} is not a declared node or input")
    return Model(input_names, input_shapes, node_map, order, shapes, output)


class GraphBuilder:
    """Incremental front end for :func:`build`."""

    def __init__(self):
        self._inputs: dict[str, tuple[int, ...]] = {}
        self._nodes: list[NodeSpec] = []

    def input(self, name: str, shape: Sequence[int]) -> str:
        self._inputs[name] = tuple(int(s) for s in shape)
        return name

    def add(self, name: str, layer: Layer, inputs: Union[str, Sequence[str]]) -> str:
        refs = [inputs] if isinstance(inputs, str) else list(inputs)
        self._nodes.append(NodeSpec(name, layer, refs))
        return name

    def build(self, output: Optional[str] = None, seed: int = 0) -> Model:
        return build(self._inputs, self._nodes, output, seed)
