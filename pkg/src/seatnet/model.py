"""Binary seat classifier: MobileNet-V2 style feature extractor plus a
two-stage convolutional head ending in global max-pool, one logit, sigmoid.

The extractor is a stride-2 3x3 stem, a table of inverted residual blocks
(expand 1x1 -> depthwise 3x3 -> linear project 1x1, shortcut when stride is 1
and channel counts match, ReLU6 activations), and a final 1x1 convolution.
The head is: 1x1 conv + BN + ReLU + dropout, 7x7 conv + BN + ReLU + dropout,
global max-pool, dense to a single logit. Output semantics: probability that
the image was taken from the driver seat.

Convolutions feeding a batch norm carry no bias tensor; the dense layer does.
"""

from dataclasses import dataclass

import numpy as np

from seatnet import kernels
from seatnet.autograd import Graph
from seatnet.errors import ConfigError, NameSetError, ShapeError
from seatnet.rng import PURPOSE_INIT, Rng, derive_seed

BN_FIELDS = ("gamma", "beta", "mean", "var")

# (expansion, output channels, repeats, first stride)
DEFAULT_BLOCK_TABLE = (
    (1, 16, 1, 1),
    (6, 24, 2, 2),
    (6, 32, 3, 2),
    (6, 64, 4, 2),
    (6, 96, 3, 1),
    (6, 160, 3, 2),
    (6, 320, 1, 1),
)

# Keeps the four stride-2 stages (total stride 32) with one block each, so a
# 96px input still reaches a 3x3 feature map but at desk-scale cost.
REDUCED_BLOCK_TABLE = (
    (1, 16, 1, 1),
    (6, 24, 1, 2),
    (6, 32, 1, 2),
    (6, 64, 1, 2),
    (6, 160, 1, 2),
)


def round_channels(value):
    """Round to the nearest multiple of 8, never below 8."""
    return max(8, int(value + 4) // 8 * 8)


@dataclass(frozen=True)
class ModelConfig:
    input_size: int = 224
    width_multiplier: float = 1.0
    block_table: tuple = DEFAULT_BLOCK_TABLE
    stem_channels: int = 32
    final_channels: int = 1280
    head_conv1_channels: int = 256
    head_conv2_channels: int = 128
    head_conv2_padding: str = "same"
    dropout1_rate: float = 0.5
    dropout2_rate: float = 0.5
    freeze_extractor: bool = False
    bn_epsilon: float = 1e-3
    bn_stat_momentum: float = 0.99
    rescale_short_side: int = 256

    def __post_init__(self):
        stride = 2  # stem
        for _, _, n, s in self.block_table:
            stride *= s
        if self.input_size % stride != 0:
            raise ConfigError(
                f"input_size {self.input_size} not divisible by total stride {stride}"
            )
        if self.head_conv2_padding not in ("valid", "same"):
            raise ConfigError(
                f"head_conv2_padding must be 'valid' or 'same', "
                f"got {self.head_conv2_padding!r}"
            )
        for name in ("dropout1_rate", "dropout2_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate < 1.0:
                raise ConfigError(f"{name} must be in [0, 1), got {rate}")
        if self.width_multiplier <= 0:
            raise ConfigError(
                f"width_multiplier must be > 0, got {self.width_multiplier}"
            )
        if self.bn_epsilon <= 0:
            raise ConfigError(f"bn_epsilon must be > 0, got {self.bn_epsilon}")

    @classmethod
    def reduced(cls, **overrides):
        """Desk-scale preset: width 0.25, 96px input, truncated block table."""
        base = dict(
            input_size=96,
            width_multiplier=0.25,
            block_table=REDUCED_BLOCK_TABLE,
            head_conv1_channels=64,
            head_conv2_channels=32,
            rescale_short_side=112,
        )
        base.update(overrides)
        return cls(**base)


@dataclass(frozen=True)
class BlockPlan:
    index: int
    in_channels: int
    hidden_channels: int
    out_channels: int
    stride: int
    expand: bool
    residual: bool

    @property
    def name(self):
        return f"extractor.block{self.index}"


@dataclass(frozen=True)
class ModelPlan:
    stem_channels: int
    blocks: tuple
    final_in: int
    final_channels: int
    feature_size: int  # spatial side of the extractor output
    head_conv2_kernel: int = 7


def build_plan(config):
    """Expand the block table into per-block channel/stride arithmetic."""
    w = config.width_multiplier
    stem = round_channels(config.stem_channels * w)
    blocks = []
    in_ch = stem
    index = 0
    for t, c, n, s in config.block_table:
        out_ch = round_channels(c * w)
        for r in range(n):
            index += 1
            stride = s if r == 0 else 1
            hidden = in_ch * t
            blocks.append(
                BlockPlan(
                    index=index,
                    in_channels=in_ch,
                    hidden_channels=hidden,
                    out_channels=out_ch,
                    stride=stride,
                    expand=t != 1,
                    residual=stride == 1 and in_ch == out_ch,
                )
            )
            in_ch = out_ch
    final = round_channels(config.final_channels * w)
    total_stride = 2 * int(np.prod([b.stride for b in blocks])) if blocks else 2
    return ModelPlan(
        stem_channels=stem,
        blocks=tuple(blocks),
        final_in=in_ch,
        final_channels=final,
        feature_size=config.input_size // total_stride,
    )


def _bn_shapes(prefix, channels):
    return [(f"{prefix}.bn.{f}", (channels,)) for f in BN_FIELDS]


def expected_shapes(config, extractor_only=False):
    """Canonical (name -> shape) map implied by a config, in build order."""
    plan = build_plan(config)
    shapes = [("extractor.stem.conv.kernel", (plan.stem_channels, 3, 3, 3))]
    shapes += _bn_shapes("extractor.stem", plan.stem_channels)
    for b in plan.blocks:
        if b.expand:
            shapes.append(
                (f"{b.name}.expand.kernel", (b.hidden_channels, b.in_channels, 1, 1))
            )
            shapes += _bn_shapes(f"{b.name}.expand", b.hidden_channels)
        shapes.append((f"{b.name}.depthwise.kernel", (b.hidden_channels, 1, 3, 3)))
        shapes += _bn_shapes(f"{b.name}.depthwise", b.hidden_channels)
        shapes.append(
            (f"{b.name}.project.kernel", (b.out_channels, b.hidden_channels, 1, 1))
        )
        shapes += _bn_shapes(f"{b.name}.project", b.out_channels)
    shapes.append(
        ("extractor.final.conv.kernel", (plan.final_channels, plan.final_in, 1, 1))
    )
    shapes += _bn_shapes("extractor.final", plan.final_channels)
    if not extractor_only:
        h1, h2 = config.head_conv1_channels, config.head_conv2_channels
        k = plan.head_conv2_kernel
        shapes.append(("head.conv1.kernel", (h1, plan.final_channels, 1, 1)))
        shapes += _bn_shapes("head.conv1", h1)
        shapes.append(("head.conv2.kernel", (h2, h1, k, k)))
        shapes += _bn_shapes("head.conv2", h2)
        shapes.append(("head.fc.weight", (1, h2)))
        shapes.append(("head.fc.bias", (1,)))
    return dict(shapes)


class WeightStore:
    """Ordered name -> float32 tensor map for the full parameter set."""

    def __init__(self, tensors=None):
        self._tensors = {}
        if tensors:
            for name, arr in tensors.items():
                self[name] = arr

    def __getitem__(self, name):
        try:
            return self._tensors[name]
        except KeyError:
            raise NameSetError(f"weight store has no tensor {name!r}") from None

    def __setitem__(self, name, arr):
        self._tensors[name] = np.ascontiguousarray(arr, dtype=np.float32)

    def __contains__(self, name):
        return name in self._tensors

    def __len__(self):
        return len(self._tensors)

    def __iter__(self):
        return iter(self._tensors)

    def names(self):
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def snapshot(self):
        """Deep copy; mutating the live store never touches the snapshot."""
        return WeightStore({name: arr.copy() for name, arr in self.items()})

    def restore(self, snapshot):
        """Make this store bitwise equal to the snapshot, in place."""
        if set(snapshot.names()) != set(self.names()):
            missing = set(self.names()) ^ set(snapshot.names())
            raise NameSetError(f"restore name sets differ on {sorted(missing)[:6]}")
        for name, arr in snapshot.items():
            self._tensors[name][...] = arr

    def validate_shapes(self, expected):
        """Exact name-set and shape check against an expected-shape map."""
        extra = [n for n in self.names() if n not in expected]
        if extra:
            raise NameSetError(f"unexpected tensors: {extra[:6]}")
        missing = [n for n in expected if n not in self]
        if missing:
            raise NameSetError(f"missing tensors: {missing[:6]}")
        for name, shape in expected.items():
            got = self[name].shape
            if got != tuple(shape):
                raise ShapeError(
                    "weight_store", f"{name}: shape {got} != expected {tuple(shape)}"
                )


def _he_uniform(shape, fan_in, rng):
    limit = np.sqrt(6.0 / fan_in)
    u = rng.uniform(int(np.prod(shape)))
    return ((2.0 * u - 1.0) * limit).reshape(shape).astype(np.float32)


def build_model(config, init_rng):
    """Initialize the full weight set; deterministic for a given rng seed.

    Conv and dense kernels are He-uniform over fan-in; batch-norm starts at
    gamma 1, beta 0, running mean 0, running var 1; the dense bias at 0.
    """
    store = WeightStore()
    for name, shape in expected_shapes(config).items():
        if name.endswith(".kernel"):
            fan_in = int(np.prod(shape[1:]))  # in_ch * kh * kw (1*kh*kw depthwise)
            store[name] = _he_uniform(shape, fan_in, init_rng)
        elif name == "head.fc.weight":
            store[name] = _he_uniform(shape, shape[1], init_rng)
        elif name.endswith(".bn.gamma"):
            store[name] = np.ones(shape, dtype=np.float32)
        elif name.endswith((".bn.beta", ".bn.mean")):
            store[name] = np.zeros(shape, dtype=np.float32)
        elif name.endswith(".bn.var"):
            store[name] = np.ones(shape, dtype=np.float32)
        elif name == "head.fc.bias":
            store[name] = np.zeros(shape, dtype=np.float32)
        else:
            raise ConfigError(f"unhandled tensor name {name!r}")
    return store


def trainable_names(config):
    """Tensors the optimizer updates: everything but BN running stats, minus
    the extractor when it is frozen."""
    names = []
    for name in expected_shapes(config):
        if name.endswith((".bn.mean", ".bn.var")):
            continue
        if config.freeze_extractor and name.startswith("extractor."):
            continue
        names.append(name)
    return names


def _check_batch(config, batch):
    if batch.ndim != 4 or batch.shape[1] != 3:
        raise ShapeError(
            "forward", f"batch must be (B, 3, S, S), got {batch.shape}"
        )
    s = config.input_size
    if batch.shape[2] != s or batch.shape[3] != s:
        raise ShapeError(
            "forward",
            f"batch spatial size {batch.shape[2]}x{batch.shape[3]} != input_size {s}",
        )


# ---------------------------------------------------------------------------
# inference path (pure numpy, no tape)


def _bn_infer(weights, prefix, x, config):
    w = weights
    return kernels.batch_norm_infer(
        x,
        w[f"{prefix}.bn.gamma"],
        w[f"{prefix}.bn.beta"],
        w[f"{prefix}.bn.mean"],
        w[f"{prefix}.bn.var"],
        config.bn_epsilon,
    )


def extractor_forward(config, weights, batch, trace=None):
    """Feature extractor in inference mode: (B,3,S,S) -> (B,C,s,s).

    ``trace``, when given a list, collects (stage name, output shape) pairs.
    """
    _check_batch(config, batch)
    plan = build_plan(config)
    x = kernels.conv2d(
        batch, weights["extractor.stem.conv.kernel"], stride=2, padding="same"
    )
    x = kernels.relu6(_bn_infer(weights, "extractor.stem", x, config))
    if trace is not None:
        trace.append(("stem", x.shape))
    for b in plan.blocks:
        y = x
        if b.expand:
            y = kernels.conv2d(y, weights[f"{b.name}.expand.kernel"])
            y = kernels.relu6(_bn_infer(weights, f"{b.name}.expand", y, config))
        y = kernels.depthwise_conv2d(
            y, weights[f"{b.name}.depthwise.kernel"], stride=b.stride, padding="same"
        )
        y = kernels.relu6(_bn_infer(weights, f"{b.name}.depthwise", y, config))
        y = kernels.conv2d(y, weights[f"{b.name}.project.kernel"])
        y = _bn_infer(weights, f"{b.name}.project", y, config)
        x = x + y if b.residual else y
        if trace is not None:
            trace.append((b.name, x.shape))
    x = kernels.conv2d(x, weights["extractor.final.conv.kernel"])
    x = kernels.relu6(_bn_infer(weights, "extractor.final", x, config))
    if trace is not None:
        trace.append(("final", x.shape))
    return x


def _head_infer(config, weights, feats):
    x = kernels.conv2d(feats, weights["head.conv1.kernel"])
    x = kernels.relu(_bn_infer(weights, "head.conv1", x, config))
    x = kernels.conv2d(
        x, weights["head.conv2.kernel"], padding=config.head_conv2_padding
    )
    x = kernels.relu(_bn_infer(weights, "head.conv2", x, config))
    x = kernels.global_max_pool(x)
    logits = kernels.dense(x, weights["head.fc.weight"], weights["head.fc.bias"])
    return kernels.sigmoid(logits[:, 0])


def forward_infer(config, weights, batch):
    """Deterministic inference: probabilities of 'driver', shape (B,)."""
    return _head_infer(config, weights, extractor_forward(config, weights, batch))


# ---------------------------------------------------------------------------
# training path (tape)


class TrainForward:
    """Result of one train-mode forward: tape, output node, parameter vars."""

    def __init__(self, graph, prob, params):
        self.graph = graph
        self.prob = prob
        self.params = params


def _bn_train(g, weights, prefix, x, gamma_var, beta_var, config):
    return g.batch_norm_train(
        x,
        gamma_var,
        beta_var,
        weights[f"{prefix}.bn.mean"],
        weights[f"{prefix}.bn.var"],
        config.bn_epsilon,
        config.bn_stat_momentum,
    )


def forward_train(config, weights, batch, rng):
    """Train-mode forward pass building the autodiff tape.

    Dropout is active (driven by ``rng``), batch norm uses batch statistics
    and updates the running stats in place. With ``config.freeze_extractor``
    the extractor runs functionally in inference mode and contributes no
    parameters to the tape.
    """
    _check_batch(config, batch)
    g = Graph()
    params = {}

    def param(name):
        var = g.leaf(weights[name], name)
        params[name] = var
        return var

    if config.freeze_extractor:
        feats = g.leaf(extractor_forward(config, weights, batch))
    else:
        plan = build_plan(config)
        x = g.leaf(batch)
        x = g.conv2d(x, param("extractor.stem.conv.kernel"), stride=2, padding="same")
        x = _bn_train(g, weights, "extractor.stem", x,
                      param("extractor.stem.bn.gamma"),
                      param("extractor.stem.bn.beta"), config)
        x = g.relu6(x)
        for b in plan.blocks:
            y = x
            if b.expand:
                y = g.conv2d(y, param(f"{b.name}.expand.kernel"))
                y = _bn_train(g, weights, f"{b.name}.expand", y,
                              param(f"{b.name}.expand.bn.gamma"),
                              param(f"{b.name}.expand.bn.beta"), config)
                y = g.relu6(y)
            y = g.depthwise_conv2d(
                y, param(f"{b.name}.depthwise.kernel"), stride=b.stride, padding="same"
            )
            y = _bn_train(g, weights, f"{b.name}.depthwise", y,
                          param(f"{b.name}.depthwise.bn.gamma"),
                          param(f"{b.name}.depthwise.bn.beta"), config)
            y = g.relu6(y)
            y = g.conv2d(y, param(f"{b.name}.project.kernel"))
            y = _bn_train(g, weights, f"{b.name}.project", y,
                          param(f"{b.name}.project.bn.gamma"),
                          param(f"{b.name}.project.bn.beta"), config)
            x = g.add(x, y) if b.residual else y
        x = g.conv2d(x, param("extractor.final.conv.kernel"))
        x = _bn_train(g, weights, "extractor.final", x,
                      param("extractor.final.bn.gamma"),
                      param("extractor.final.bn.beta"), config)
        feats = g.relu6(x)

    x = g.conv2d(feats, param("head.conv1.kernel"))
    x = _bn_train(g, weights, "head.conv1", x,
                  param("head.conv1.bn.gamma"), param("head.conv1.bn.beta"), config)
    x = g.relu(x)
    x = g.dropout(x, config.dropout1_rate, rng)
    x = g.conv2d(x, param("head.conv2.kernel"), padding=config.head_conv2_padding)
    x = _bn_train(g, weights, "head.conv2", x,
                  param("head.conv2.bn.gamma"), param("head.conv2.bn.beta"), config)
    x = g.relu(x)
    x = g.dropout(x, config.dropout2_rate, rng)
    x = g.global_max_pool(x)
    logits = g.dense(x, param("head.fc.weight"), param("head.fc.bias"))
    prob = g.sigmoid(logits)
    prob = g.reshape(prob, (batch.shape[0],))
    return TrainForward(g, prob, params)


def forward(config, weights, batch, mode="infer", rng=None):
    """Probabilities of 'driver' for a batch, in either mode."""
    batch = np.ascontiguousarray(batch, dtype=np.float32)
    if mode == "infer":
        return forward_infer(config, weights, batch)
    if mode == "train":
        if rng is None:
            raise ConfigError("train-mode forward requires an rng")
        return forward_train(config, weights, batch, rng).prob.value
    raise ConfigError(f"unknown forward mode {mode!r}")


def new_model(config, seed):
    """Convenience: He-initialized WeightStore from an integer seed."""
    return build_model(config, Rng(derive_seed(seed, PURPOSE_INIT)))
