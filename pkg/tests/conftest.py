"""Shared helpers: finite-difference gradient checking for layers and graphs."""

from __future__ import annotations

import numpy as np

from deepseries.graph import GraphBuilder


def single_node_model(layer, in_shape, n_inputs=1, seed=0):
    """Wrap one layer in a graph with ``n_inputs`` identical-shape inputs."""
    b = GraphBuilder()
    ins = [b.input(f"x{i}", in_shape) for i in range(n_inputs)]
    b.add("L", layer, ins if n_inputs > 1 else ins[0])
    return b.build(seed=seed)


def fd_gradcheck(model, in_shapes, *, batch=3, seed=0, train=True,
                 h=1e-5, probes=6):
    """Max relative error between backprop and central finite differences.

    Probes ``probes`` random coordinates of every graph input and every
    parameter.  The loss is a fixed random weighting of the output, evaluated
    in the same mode as the analytic pass so batch statistics agree.
    """
    rng = np.random.default_rng(seed)
    xs = {name: rng.normal(size=(batch, *shape))
          for name, shape in in_shapes.items()}
    w = rng.normal(size=model.node_shapes[model.output])

    def loss(xd):
        out = model.forward(xd, train=train)
        return float(np.sum(w * np.asarray(out.array)))

    out = model.forward(xs, train=True)
    grads = model.backward(np.broadcast_to(w, out.shape).copy())
    igrads = model.last_input_grads

    worst = 0.0
    for name, x in xs.items():
        g = igrads[name]
        for _ in range(probes):
            idx = tuple(rng.integers(0, s) for s in x.shape)
            xp = {k: v.copy() for k, v in xs.items()}
            xm = {k: v.copy() for k, v in xs.items()}
            xp[name][idx] += h
            xm[name][idx] -= h
            num = (loss(xp) - loss(xm)) / (2 * h)
            worst = max(worst, _rel(num, g[idx]))
    for pname, arr in model.parameters().items():
        flat = arr.reshape(-1)
        picks = rng.choice(flat.size, size=min(probes, flat.size), replace=False)
        gflat = grads[pname].reshape(-1)
        for j in picks:
            orig = flat[j]
            flat[j] = orig + h
            lp = loss(xs)
            flat[j] = orig - h
            lm = loss(xs)
            flat[j] = orig
            num = (lp - lm) / (2 * h)
            worst = max(worst, _rel(num, gflat[j]))
    return worst


def _rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-3)


def layer_gradcheck(layer_factory, in_shape, *, n_inputs=1, seeds=(0, 1, 2, 3, 4),
                    batch=3, train=True, probes=4):
    """Worst finite-difference error across several independent seeds."""
    worst = 0.0
    for seed in seeds:
        model = single_node_model(layer_factory(), in_shape,
                                  n_inputs=n_inputs, seed=seed)
        shapes = {name: model.input_shapes[name] for name in model.input_names}
        worst = max(worst, fd_gradcheck(model, shapes, batch=batch,
                                        seed=seed + 17, train=train,
                                        probes=probes))
    return worst
