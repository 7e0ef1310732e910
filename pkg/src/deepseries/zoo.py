"""Registry of ready-made 1-D time-series architectures and task heads.

Every entry builds an embedding graph (no task head) from a ``[time,
channels]`` input shape; :func:`make_top` describes a forecasting,
classification, or anomaly head that :func:`build_model` can append.
Hyperparameters have working defaults and can be overridden per build.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .errors import ParameterError, RegistryError, ShapeError
from .graph import GraphBuilder, Model
from .layers import (
    GRU,
    LSTM,
    ActivationLayer,
    BatchNorm1D,
    Bidirectional,
    Concat,
    Conv1D,
    Dense,
    Dropout,
    Flatten,
    Pool1D,
    Reshape,
    RTABlock,
    SEBlock,
    SpatialTemporalAttention,
    TanhAttention,
    Upsample1D,
)

FAMILY_KEYS = ("conv1d", "lstm", "gru", "bilstm", "bigru", "pool1d",
               "batchnorm", "dropout", "se_block", "rta_block", "attention")

# node kinds folded into each family count
_FAMILY_KINDS = {
    "conv1d": ("conv1d",),
    "lstm": ("lstm",),
    "gru": ("gru",),
    "bilstm": ("bilstm",),
    "bigru": ("bigru",),
    "pool1d": ("pool1d",),
    "batchnorm": ("batchnorm",),
    "dropout": ("dropout",),
    "se_block": ("se_block",),
    "rta_block": ("rta_block",),
    "attention": ("st_attention", "tanh_attention"),
}


def family_counts(model: Model) -> dict[str, int]:
    """Collapse a model's node kinds into the family-count vocabulary."""
    kinds = model.kind_counts()
    return {
        fam: sum(kinds.get(k, 0) for k in alias)
        for fam, alias in _FAMILY_KINDS.items()
    }


def family_presence(model: Model) -> dict[str, bool]:
    """CNN/LSTM/GRU/BiLSTM/BiGRU presence booleans for a built graph.

    Residual temporal-attention blocks are convolutional, so they count
    toward CNN presence.
    """
    c = family_counts(model)
    return {
        "cnn": (c["conv1d"] + c["rta_block"]) > 0,
        "lstm": c["lstm"] > 0,
        "gru": c["gru"] > 0,
        "bilstm": c["bilstm"] > 0,
        "bigru": c["bigru"] > 0,
    }


@dataclass(frozen=True)
class ArchitectureDescriptor:
    """Registry metadata for one architecture.

    ``family_contract`` holds the node-family counts of the default build;
    ``families`` holds the published capability booleans (for entries with a
    selectable recurrent flavour the union over allowed flavours).
    """

    name: str
    summary: str
    family_contract: dict[str, int]
    families: dict[str, bool]
    default_hyper: dict
    multi_input: int = 1
    citation: str = ""


@dataclass(frozen=True)
class TopModule:
    """A task head: an ordered list of layer factories appended to a graph."""

    kind: str
    spec: tuple = ()

    def instantiate(self):
        return [(suffix, factory()) for suffix, factory in self.spec]


def make_top(kind: str, *, horizon: int = 0, features: int = 0, classes: int = 0,
             steps: int = 0, dropout: float = 0.2,
             layers: Optional[Sequence] = None) -> TopModule:
    """Describe a task head.

    * ``forecast``: flatten, dense(horizon*features, relu), reshape.
    * ``classify``: flatten, dropout, dense(20, relu), dense(10, relu),
      dense(classes, softmax).
    * ``anomaly``: flatten, dense(32), dense(64), dense(features),
      dense(steps*features, linear), reshape to [steps, features].
    * ``custom``: caller-supplied ``(suffix, factory)`` pairs.
    """
    if kind == "forecast":
        if horizon < 1 or features < 1:
            raise ParameterError("forecast head needs horizon >= 1 and features >= 1")
        return TopModule(kind, (
            ("flatten", Flatten),
            ("dense", lambda: Dense(horizon * features, activation="relu")),
            ("reshape", lambda: Reshape((horizon, features))),
        ))
    if kind == "classify":
        if classes < 2:
            raise ParameterError("classify head needs classes >= 2")
        rate = float(dropout)
        return TopModule(kind, (
            ("flatten", Flatten),
            ("dropout", lambda: Dropout(rate)),
            ("dense1", lambda: Dense(20, activation="relu")),
            ("dense2", lambda: Dense(10, activation="relu")),
            ("out", lambda: Dense(classes, activation="softmax")),
        ))
    if kind == "anomaly":
        if steps < 1 or features < 1:
            raise ParameterError("anomaly head needs steps >= 1 and features >= 1")
        return TopModule(kind, (
            ("flatten", Flatten),
            ("dense1", lambda: Dense(32, activation="relu")),
            ("dense2", lambda: Dense(64, activation="relu")),
            ("dense3", lambda: Dense(features, activation="relu")),
            ("dense4", lambda: Dense(steps * features)),
            ("reshape", lambda: Reshape((steps, features))),
        ))
    if kind == "custom":
        if not layers:
            raise ParameterError("custom head needs (suffix, factory) pairs")
        return TopModule(kind, tuple(layers))
    raise ParameterError(f"unknown head kind {kind!r}")


# -- builders -------------------------------------------------------------------
#
# Each builder wires nodes into a GraphBuilder and returns the output node
# name.  ``h`` is the merged hyperparameter dict.


def _conv_pool_chain(b, cur, h, *, relu=True, pool_after_each=True,
                     first_kernel=None, prefix=""):
    act = "relu" if relu else "linear"
    for i, f in enumerate(h["filters"]):
        k = first_kernel if (i == 0 and first_kernel) else h["kernel"]
        cur = b.add(f"{prefix}conv{i + 1}", Conv1D(f, k, activation=act), cur)
        if pool_after_each:
            cur = b.add(f"{prefix}pool{i + 1}", Pool1D(h["pool"]), cur)
    return cur


def _cai_wenjuan(b, inp, h):
    entries = []
    for i, k in enumerate(h["entry_kernels"]):
        entries.append(b.add(
            f"entry{i + 1}",
            Conv1D(h["entry_filters"], k, padding="same", activation="relu"),
            inp[0],
        ))
    cur = b.add("entry_cat", Concat(len(entries)), entries)
    g = h["growth"]
    for bi in range(h["blocks"]):
        for li in range(h["block_depth"]):
            tag = f"b{bi + 1}u{li + 1}"
            y = b.add(f"{tag}_bn1", BatchNorm1D(), cur)
            y = b.add(f"{tag}_act1", ActivationLayer("relu"), y)
            y = b.add(f"{tag}_conv1", Conv1D(4 * g, 1), y)
            y = b.add(f"{tag}_bn2", BatchNorm1D(), y)
            y = b.add(f"{tag}_act2", ActivationLayer("relu"), y)
            y = b.add(f"{tag}_conv2", Conv1D(g, h["kernel"], padding="same"), y)
            cur = b.add(f"{tag}_cat", Concat(2), [cur, y])
        cur = b.add(f"se{bi + 1}", SEBlock(h["se_ratio"]), cur)
    return b.add("gap", Pool1D(op="global_avg"), cur)


def _chen_chen(b, inp, h):
    cur = _conv_pool_chain(b, inp[0], h)
    cur = b.add("lstm1", LSTM(h["units"], return_sequences=True), cur)
    return b.add("lstm2", LSTM(h["units"]), cur)


def _fu_jiangmeng(b, inp, h):
    cur = _conv_pool_chain(b, inp[0], h)
    return b.add("lstm", LSTM(h["units"]), cur)


def _gao_junli(b, inp, h):
    return b.add("lstm", LSTM(h["units"]), inp[0])


def _gen_minxing(b, inp, h):
    return b.add("bilstm", Bidirectional(LSTM(h["units"])), inp[0])


def _hong_tan(b, inp, h):
    cur = _conv_pool_chain(b, inp[0], h)
    cur = b.add("lstm1", LSTM(h["units"], return_sequences=True), cur)
    cur = b.add("lstm2", LSTM(h["units"], return_sequences=True), cur)
    return b.add("lstm3", LSTM(h["units"]), cur)


def _htet_myet_lynn(b, inp, h):
    cur = _conv_pool_chain(b, inp[0], h, pool_after_each=False)
    if h["recurrent"] not in ("gru", "lstm"):
        raise ParameterError("recurrent must be 'gru' or 'lstm'")
    inner = LSTM(h["units"]) if h["recurrent"] == "lstm" else GRU(h["units"])
    return b.add("birnn", Bidirectional(inner), cur)


def _huang_mei_ling(b, inp, h):
    return _conv_pool_chain(b, inp[0], h)


def _khan_zulfiqar(b, inp, h):
    cur = inp[0]
    for i, f in enumerate(h["filters"]):
        cur = b.add(f"conv{i + 1}", Conv1D(f, h["kernel"], activation="relu"), cur)
        cur = b.add(f"drop{i + 1}", Dropout(h["dropout"]), cur)
    cur = b.add("gru1", GRU(h["units"], return_sequences=True), cur)
    return b.add("gru2", GRU(h["units"]), cur)


def _kim_tae_young(b, inp, h):
    cur = b.add("conv1", Conv1D(h["filters"][0], h["kernel"], activation="relu"), inp[0])
    cur = b.add("pool1", Pool1D(h["pool"]), cur)
    cur = b.add("conv2", Conv1D(h["filters"][1], h["kernel"], activation="relu"), cur)
    return b.add("lstm", LSTM(h["units"]), cur)


def _kong_zhengmin(b, inp, h):
    cur = _conv_pool_chain(b, inp[0], h)
    cur = b.add("lstm1", LSTM(h["units"], return_sequences=True), cur)
    return b.add("lstm2", LSTM(h["units"]), cur)


def _lih_oh_shu(b, inp, h):
    cur = _conv_pool_chain(b, inp[0], h, first_kernel=h["first_kernel"])
    return b.add("lstm", LSTM(h["units"]), cur)


def _oh_shu_lih(b, inp, h):
    cur = inp[0]
    last = len(h["filters"]) - 1
    for i, f in enumerate(h["filters"]):
        cur = b.add(f"conv{i + 1}",
                    Conv1D(f, h["kernel"], padding="full", activation="relu"), cur)
        if i < last:  # pooling sits between the convolutions
            cur = b.add(f"pool{i + 1}", Pool1D(h["pool"]), cur)
    return b.add("lstm", LSTM(h["units"]), cur)


def _shi_haotian(b, inp, h):
    branches = []
    for i, x in enumerate(inp):
        y = b.add(f"branch{i + 1}_conv",
                  Conv1D(h["filters"][0], h["kernel"], activation="relu"), x)
        y = b.add(f"branch{i + 1}_pool", Pool1D(h["pool"]), y)
        branches.append(y)
    cur = b.add("concat", Concat(len(branches)), branches)
    return b.add("lstm", LSTM(h["units"]), cur)


def _wang_kejun(b, inp, h):
    cur = b.add("lstm1", LSTM(h["units"], return_sequences=True), inp[0])
    cur = b.add("lstm2", LSTM(h["units"], return_sequences=True), cur)
    for i, f in enumerate(h["filters"]):
        cur = b.add(f"conv{i + 1}", Conv1D(f, h["kernel"], activation="relu"), cur)
    return cur


def _wei_xiaoyan(b, inp, h):
    cur = inp[0]
    for i, f in enumerate(h["filters"]):
        cur = b.add(f"conv{i + 1}",
                    Conv1D(f, h["kernel"], activation="leaky_relu"), cur)
        cur = b.add(f"pool{i + 1}", Pool1D(h["pool"]), cur)
        cur = b.add(f"bn{i + 1}", BatchNorm1D(), cur)
    cur = b.add("lstm1", LSTM(h["units"], return_sequences=True), cur)
    cur = b.add("bn_rnn", BatchNorm1D(), cur)
    return b.add("lstm2", LSTM(h["units"]), cur)


def _yao_qihang(b, inp, h):
    cur = inp[0]
    idx = 0
    for bi, depth in enumerate(h["block_convs"]):
        for _ in range(depth):
            idx += 1
            k = h["first_kernel"] if idx == 1 else h["kernel"]
            cur = b.add(f"conv{idx}", Conv1D(h["filters"][bi], k), cur)
            cur = b.add(f"bn{idx}", BatchNorm1D(), cur)
            cur = b.add(f"act{idx}", ActivationLayer("relu"), cur)
        cur = b.add(f"pool{bi + 1}", Pool1D(h["pool"]), cur)
    cur = b.add("lstm1", LSTM(h["units"], return_sequences=True), cur)
    cur = b.add("lstm2", LSTM(h["units"], return_sequences=bool(h["attention"])), cur)
    if h["attention"]:
        cur = b.add("attention", TanhAttention(h["att_units"]), cur)
    return cur


def _yibo_gao(b, inp, h):
    cur = inp[0]
    for i, f in enumerate(h["filters"]):
        cur = b.add(f"rta{i + 1}",
                    RTABlock(f, h["kernel"], h["rta_pool"]), cur)
    return b.add("gap", Pool1D(op="global_avg"), cur)


def _yildirim_encoder(b, x, h, enc=None):
    enc = enc or _yildirim_encoder_layers(h)
    cur = b.add("enc_conv1", enc["conv1"], x)
    cur = b.add("enc_pool1", enc["pool1"], cur)
    cur = b.add("enc_conv2", enc["conv2"], cur)
    cur = b.add("enc_pool2", enc["pool2"], cur)
    return cur


def _yildirim_encoder_layers(h):
    return {
        "conv1": Conv1D(h["filters"][0], h["kernel"], padding="same", activation="relu"),
        "pool1": Pool1D(h["pool"]),
        "conv2": Conv1D(h["filters"][1], h["kernel"], padding="same", activation="relu"),
        "pool2": Pool1D(h["pool"]),
    }


def _yildirim_ozal(b, inp, h):
    cur = _yildirim_encoder(b, inp[0], h)
    return b.add("lstm", LSTM(h["units"]), cur)


def _zhang_jin(b, inp, h):
    cur = inp[0]
    for i, f in enumerate(h["filters"]):
        cur = b.add(f"conv{i + 1}", Conv1D(f, h["kernel"], activation="relu"), cur)
        cur = b.add(f"pool{i + 1}", Pool1D(h["pool"]), cur)
        cur = b.add(f"att{i + 1}",
                    SpatialTemporalAttention(h["se_ratio"], h["att_kernel"]), cur)
    return b.add("bigru", Bidirectional(GRU(h["units"])), cur)


def _zheng_zhenyu(b, inp, h):
    cur = inp[0]
    idx = 0
    for bi, f in enumerate(h["filters"]):
        for _ in range(2):
            idx += 1
            cur = b.add(f"conv{idx}", Conv1D(f, h["kernel"], activation="relu"), cur)
            cur = b.add(f"bn{idx}", BatchNorm1D(), cur)
        cur = b.add(f"pool{bi + 1}", Pool1D(h["pool"]), cur)
    return b.add("lstm", LSTM(h["units"]), cur)


def _example_model(b, inp, h):
    cur = _conv_pool_chain(b, inp[0], h)
    return b.add("lstm", LSTM(h["units"]), cur)


@dataclass(frozen=True)
class _Entry:
    descriptor: ArchitectureDescriptor
    builder: Callable


def _contract(**kw) -> dict[str, int]:
    counts = {k: 0 for k in FAMILY_KEYS}
    counts.update(kw)
    return counts


def _fams(**kw) -> dict[str, bool]:
    fams = {"cnn": False, "lstm": False, "gru": False, "bilstm": False, "bigru": False}
    fams.update(kw)
    return fams


_REGISTRY: dict[str, _Entry] = {}


def _register(name, summary, contract, families, hyper, builder,
              multi_input=1, citation=None):
    _REGISTRY[name] = _Entry(
        ArchitectureDescriptor(
            name=name,
            summary=summary,
            family_contract=contract,
            families=families,
            default_hyper=hyper,
            multi_input=multi_input,
            citation=citation or name,
        ),
        builder,
    )


_register(
    "CaiWenjuan",
    "parallel entry convolutions, two dense concat blocks with squeeze-excite, global pool",
    _contract(conv1d=19, pool1d=1, batchnorm=16, se_block=2),
    _fams(cnn=True),
    {"entry_kernels": [3, 5, 7], "entry_filters": 8, "growth": 8, "blocks": 2,
     "block_depth": 4, "kernel": 3, "se_ratio": 8},
    _cai_wenjuan,
)
_register(
    "ChenChen",
    "six conv/max-pool stages into two stacked LSTMs",
    _contract(conv1d=6, pool1d=6, lstm=2),
    _fams(cnn=True, lstm=True),
    {"filters": [16, 32, 64, 128, 128, 128], "kernel": 3, "pool": 2, "units": 64},
    _chen_chen,
)
_register(
    "FuJiangmeng",
    "one conv/max-pool stage into an LSTM",
    _contract(conv1d=1, pool1d=1, lstm=1),
    _fams(cnn=True, lstm=True),
    {"filters": [16], "kernel": 3, "pool": 2, "units": 64},
    _fu_jiangmeng,
)
_register(
    "GaoJunli",
    "a single LSTM over the raw series",
    _contract(lstm=1),
    _fams(lstm=True),
    {"units": 64},
    _gao_junli,
)
_register(
    "GenMinxing",
    "a single bidirectional LSTM over the raw series",
    _contract(bilstm=1),
    _fams(bilstm=True),
    {"units": 64},
    _gen_minxing,
)
_register(
    "HongTan",
    "two conv/max-pool stages into three stacked LSTMs",
    _contract(conv1d=2, pool1d=2, lstm=3),
    _fams(cnn=True, lstm=True),
    {"filters": [16, 32], "kernel": 3, "pool": 2, "units": 64},
    _hong_tan,
)
_register(
    "HtetMyetLynn",
    "four convolutions into a bidirectional recurrent layer (GRU or LSTM)",
    _contract(conv1d=4, bigru=1),
    _fams(cnn=True, bilstm=True, bigru=True),
    {"filters": [16, 32, 64, 128], "kernel": 3, "units": 64, "recurrent": "gru"},
    _htet_myet_lynn,
)
_register(
    "HuangMeiLing",
    "two conv/max-pool stages, convolution only",
    _contract(conv1d=2, pool1d=2),
    _fams(cnn=True),
    {"filters": [16, 32], "kernel": 3, "pool": 2},
    _huang_mei_ling,
)
_register(
    "KhanZulfiqar",
    "two conv+dropout stages into two stacked GRUs",
    _contract(conv1d=2, dropout=2, gru=2),
    _fams(cnn=True, gru=True),
    {"filters": [16, 32], "kernel": 3, "dropout": 0.2, "units": 64},
    _khan_zulfiqar,
)
_register(
    "KimTaeYoung",
    "two convolutions with max pooling between, then an LSTM",
    _contract(conv1d=2, pool1d=1, lstm=1),
    _fams(cnn=True, lstm=True),
    {"filters": [16, 32], "kernel": 3, "pool": 2, "units": 64},
    _kim_tae_young,
)
_register(
    "KongZhengmin",
    "one conv/max-pool stage into two stacked LSTMs",
    _contract(conv1d=1, pool1d=1, lstm=2),
    _fams(cnn=True, lstm=True),
    {"filters": [16], "kernel": 3, "pool": 2, "units": 64},
    _kong_zhengmin,
)
_register(
    "LihOhShu",
    "five conv/max-pool stages (wide first kernel) into an LSTM",
    _contract(conv1d=5, pool1d=5, lstm=1),
    _fams(cnn=True, lstm=True),
    {"filters": [16, 32, 64, 128, 128], "kernel": 3, "first_kernel": 5,
     "pool": 2, "units": 64},
    _lih_oh_shu,
)
_register(
    "OhShuLih",
    "three full-padded convolutions with pooling between, then an LSTM",
    _contract(conv1d=3, pool1d=2, lstm=1),
    _fams(cnn=True, lstm=True),
    {"filters": [16, 32, 64], "kernel": 3, "pool": 2, "units": 64},
    _oh_shu_lih,
)
_register(
    "ShiHaotian",
    "three parallel conv/max-pool branches concatenated into an LSTM",
    _contract(conv1d=3, pool1d=3, lstm=1),
    _fams(cnn=True, lstm=True),
    {"filters": [16], "kernel": 3, "pool": 2, "units": 64},
    _shi_haotian,
    multi_input=3,
)
_register(
    "WangKejun",
    "two sequence LSTMs followed by two convolutions",
    _contract(conv1d=2, lstm=2),
    _fams(cnn=True, lstm=True),
    {"filters": [32, 64], "kernel": 3, "units": 64},
    _wang_kejun,
)
_register(
    "WeiXiaoyan",
    "five conv(leaky)/pool/batchnorm blocks, then LSTM-batchnorm-LSTM",
    _contract(conv1d=5, pool1d=5, batchnorm=6, lstm=2),
    _fams(cnn=True, lstm=True),
    {"filters": [16, 32, 64, 128, 128], "kernel": 3, "pool": 2, "units": 64},
    _wei_xiaoyan,
)
_register(
    "YaoQihang",
    "thirteen conv-batchnorm-relu layers in five pooled blocks, two LSTMs, "
    "optional tanh attention head",
    _contract(conv1d=13, pool1d=5, batchnorm=13, lstm=2),
    _fams(cnn=True, lstm=True),
    {"filters": [16, 32, 64, 128, 128], "block_convs": [2, 2, 3, 3, 3],
     "kernel": 3, "first_kernel": 5, "pool": 2, "units": 64,
     "attention": False, "att_units": 32},
    _yao_qihang,
)
_register(
    "YiboGao",
    "three stacked residual temporal-attention blocks with a global pool",
    _contract(rta_block=3, pool1d=1),
    _fams(cnn=True),
    {"filters": [16, 32, 64], "kernel": 3, "rta_pool": 2},
    _yibo_gao,
)
_register(
    "YildirimOzal",
    "convolutional encoder (trainable as an autoencoder) into an LSTM",
    _contract(conv1d=2, pool1d=2, lstm=1),
    _fams(cnn=True, lstm=True),
    {"filters": [16, 32], "kernel": 3, "pool": 2, "units": 64},
    _yildirim_ozal,
)
_register(
    "ZhangJin",
    "conv/pool stages gated by spatial-temporal attention, then a bidirectional GRU",
    _contract(conv1d=2, pool1d=2, attention=2, bigru=1),
    _fams(cnn=True, bigru=True),
    {"filters": [16, 32], "kernel": 3, "pool": 2, "units": 64,
     "se_ratio": 8, "att_kernel": 7},
    _zhang_jin,
)
_register(
    "ZhengZhenyu",
    "three blocks of two conv-batchnorm pairs with max pooling, then an LSTM",
    _contract(conv1d=6, pool1d=3, batchnorm=6, lstm=1),
    _fams(cnn=True, lstm=True),
    {"filters": [16, 32, 64], "kernel": 3, "pool": 2, "units": 64},
    _zheng_zhenyu,
)
_register(
    "ExampleModel",
    "two conv/max-pool stages into a compact LSTM",
    _contract(conv1d=2, pool1d=2, lstm=1),
    _fams(cnn=True, lstm=True),
    {"filters": [16, 32], "kernel": 3, "pool": 2, "units": 20},
    _example_model,
    citation="worked example",
)


# -- public API -----------------------------------------------------------------


def names() -> list[str]:
    return list(_REGISTRY)


def list_models() -> list[ArchitectureDescriptor]:
    return [e.descriptor for e in _REGISTRY.values()]


def get_descriptor(name: str) -> ArchitectureDescriptor:
    try:
        return _REGISTRY[name].descriptor
    except KeyError:
        raise RegistryError(
            f"unknown architecture {name!r}; the catalogue lists the valid names"
        ) from None


def _merge_hyper(desc: ArchitectureDescriptor, overrides: dict) -> dict:
    h = dict(desc.default_hyper)
    for key, val in overrides.items():
        if key not in h:
            raise ParameterError(
                f"{desc.name} has no hyperparameter {key!r}; allowed: {sorted(h)}"
            )
        h[key] = val
    return h


def _assemble(name: str, input_shape, hyper: dict, top: Optional[TopModule],
              seed: int) -> Model:
    entry = _REGISTRY.get(name)
    if entry is None:
        raise RegistryError(
            f"unknown architecture {name!r}; the catalogue lists the valid names"
        )
    desc = entry.descriptor
    h = _merge_hyper(desc, hyper)
    shape = tuple(int(s) for s in input_shape)
    if len(shape) != 2 or min(shape) < 1:
        raise ShapeError(f"input_shape must be [time, channels], got {input_shape}")
    b = GraphBuilder()
    if desc.multi_input == 1:
        inputs = [b.input("x", shape)]
    else:
        inputs = [b.input(f"x{i + 1}", shape) for i in range(desc.multi_input)]
    out = entry.builder(b, inputs, h)
    if top is not None:
        for suffix, layer in top.instantiate():
            out = b.add(f"top_{suffix}", layer, out)
    model = b.build(output=out, seed=seed)
    model.architecture = name
    model.hyper = h
    return model


def build_model(name: str, input_shape=(1000, 1), top: Optional[TopModule] = None,
                seed: int = 0, **hyper) -> Model:
    """Build a registry architecture, optionally with a task head appended.

    Without a head the model ends at the embedding output.  On a too-short
    input the error reports the smallest workable time extent.
    """
    try:
        return _assemble(name, input_shape, hyper, top, seed)
    except ShapeError as exc:
        minimum = None
        try:
            minimum = minimum_input_length(name, int(input_shape[1]), **hyper)
        except (ShapeError, ParameterError, IndexError, TypeError):
            pass
        if minimum is not None and input_shape[0] < minimum:
            raise ShapeError(
                f"{exc}; {name} needs time >= {minimum} with these hyperparameters"
            ) from None
        raise


def minimum_input_length(name: str, channels: int = 1, **hyper) -> int:
    """Smallest time extent the architecture accepts, found by probing."""
    def fits(t: int) -> bool:
        try:
            _assemble(name, (t, channels), dict(hyper), None, seed=0)
            return True
        except ShapeError:
            return False

    hi = 1
    while hi <= 65536 and not fits(hi):
        hi *= 2
    if hi > 65536:
        raise ShapeError(f"{name} accepts no input up to time 65536")
    lo = max(1, hi // 2)
    while lo < hi:
        mid = (lo + hi) // 2
        if fits(mid):
            hi = mid
        else:
            lo = mid + 1
    return hi


def describe(name: str, input_shape=(1000, 1), **hyper) -> dict:
    """Structured report: families, default hyper, parameter count, shapes."""
    desc = get_descriptor(name)
    model = build_model(name, input_shape, seed=0, **hyper)
    return {
        "name": desc.name,
        "summary": desc.summary,
        "citation": desc.citation,
        "multi_input": desc.multi_input,
        "families": family_counts(model),
        "presence": family_presence(model),
        "default_hyper": desc.default_hyper,
        "param_count": model.param_count(),
        "output_shape": model.output_shape,
    }


# -- the autoencoder pair -----------------------------------------------------------


@dataclass
class AutoencoderPair:
    """Two graphs sharing encoder layer instances, plus the frozen-name list."""

    autoencoder: Model
    classifier: Model
    encoder_params: tuple


def build_autoencoder_pair(input_shape=(1000, 1), top: Optional[TopModule] = None,
                           seed: int = 0, **hyper) -> AutoencoderPair:
    """Reconstruction and classification graphs for the encoder+LSTM entry.

    The autoencoder mirrors the encoder with conv/upsample stages back to the
    input shape (time must divide by pool^2); the classifier runs the shared
    encoder into an LSTM and the optional task head.  Training the autoencoder
    moves the classifier's encoder weights because the layer instances are
    shared.
    """
    desc = get_descriptor("YildirimOzal")
    h = _merge_hyper(desc, hyper)
    t, ch = (int(s) for s in input_shape)
    down = h["pool"] * h["pool"]
    if t % down != 0:
        raise ShapeError(
            f"autoencoder mirror needs time divisible by {down}, got {t}"
        )
    enc = _yildirim_encoder_layers(h)

    ab = GraphBuilder()
    x = ab.input("x", (t, ch))
    cur = _yildirim_encoder(ab, x, h, enc)
    cur = ab.add("dec_conv1", Conv1D(h["filters"][1], h["kernel"], padding="same",
                                     activation="relu"), cur)
    cur = ab.add("dec_up1", Upsample1D(h["pool"]), cur)
    cur = ab.add("dec_conv2", Conv1D(h["filters"][0], h["kernel"], padding="same",
                                     activation="relu"), cur)
    cur = ab.add("dec_up2", Upsample1D(h["pool"]), cur)
    cur = ab.add("dec_out", Conv1D(ch, h["kernel"], padding="same"), cur)
    autoencoder = ab.build(output=cur, seed=seed)
    autoencoder.architecture = "YildirimOzal/autoencoder"

    cb = GraphBuilder()
    x = cb.input("x", (t, ch))
    cur = _yildirim_encoder(cb, x, h, enc)
    cur = cb.add("lstm", LSTM(h["units"]), cur)
    if top is not None:
        for suffix, layer in top.instantiate():
            cur = cb.add(f"top_{suffix}", layer, cur)
    classifier = cb.build(output=cur, seed=seed)
    classifier.architecture = "YildirimOzal"
    classifier.hyper = h

    frozen = tuple(
        f"{node}/{p}" for node in ("enc_conv1", "enc_conv2") for p in ("w", "b")
    )
    return AutoencoderPair(autoencoder, classifier, frozen)
