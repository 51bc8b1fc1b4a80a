"""
In-process oracle and invariant suite behind the ``selftest`` command.

Every check compares an operation against a hand-derived value or an
independently written brute-force implementation (plain loops, no shared
kernels). Results are collected in a SelfTestResult and printed as a
pass/fail table.
"""

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, TextIO, Tuple

import numpy as np

from src.core.exceptions import ConfigurationError, TrackerError
from src.core.logging_config import get_logger
from src.kernels import numkernel as nk
from src.kernels.numkernel import BatchNormParams, ConvParams, LinearParams
from src.repositories.config_document import dump_run_config, load_run_config, parse_run_config
from src.schemas.boxes import BoundingBox
from src.schemas.run_config import (
    AdapterConfig,
    EncoderConfig,
    LossConfig,
    MemoryConfig,
    RunConfig,
    SceneConfig,
)
from src.services import encoder as enc
from src.services import freq_selector as fs
from src.services import fusion, losses, metrics, synthgen
from src.services.memory import FilterParams, MemoryBank, MemoryPool, attn_update, filter_cue
from src.services.tokens import TokenSequence
from src.services.tracker import AdapterParams, TrackerParams, TrackerSession

logger = get_logger(__name__)


class SelfTestFailure(Exception):
    """Raised inside a check when an expectation does not hold."""


def expect(condition: bool, message: str) -> None:
    if not condition:
        raise SelfTestFailure(message)


def expect_close(actual: float, expected: float, tol: float, what: str) -> None:
    expect(abs(actual - expected) <= tol, f"{what}: got {actual!r}, expected {expected!r}")


@dataclass
class CheckOutcome:
    """Outcome of one check."""

    module: str
    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        line = f"  [{status}] {self.module:<14} {self.name}"
        if self.detail:
            line += f"\n         {self.detail}"
        return line


@dataclass
class SelfTestResult:
    """Results from a selftest run."""

    outcomes: List[CheckOutcome] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.outcomes) and all(o.passed for o in self.outcomes)

    @property
    def failures(self) -> List[CheckOutcome]:
        return [o for o in self.outcomes if not o.passed]

    def get_summary(self) -> str:
        total, failed = len(self.outcomes), len(self.failures)
        return f"Checks: {total}, Passed: {total - failed}, Failed: {failed}"

    def print_report(self, stream: TextIO) -> None:
        """Print a formatted pass/fail table."""
        print("=" * 80, file=stream)
        print("SELFTEST REPORT", file=stream)
        print("=" * 80, file=stream)
        for outcome in self.outcomes:
            print(outcome, file=stream)
        print("-" * 80, file=stream)
        print("SELFTEST PASSED" if self.passed else "SELFTEST FAILED", file=stream)
        print(self.get_summary(), file=stream)


CheckFunction = Callable[[], None]
_CHECKS: List[Tuple[str, str, CheckFunction]] = []


def check(module: str, name: str) -> Callable[[CheckFunction], CheckFunction]:
    """Register a check function."""

    def register(func: CheckFunction) -> CheckFunction:
        _CHECKS.append((module, name, func))
        return func

    return register


# ============================================================================
# INDEPENDENT ORACLES
# ============================================================================


def _loop_conv(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray, pad: int) -> np.ndarray:
    c_in, h, w = x.shape
    c_out, _, k, _ = kernel.shape
    padded = np.zeros((c_in, h + 2 * pad, w + 2 * pad))
    padded[:, pad : pad + h, pad : pad + w] = x
    out = np.zeros((c_out, h + 2 * pad - k + 1, w + 2 * pad - k + 1))
    for o in range(c_out):
        for i in range(out.shape[1]):
            for j in range(out.shape[2]):
                total = bias[o]
                for c in range(c_in):
                    for a in range(k):
                        for b in range(k):
                            total += padded[c, i + a, j + b] * kernel[o, c, a, b]
                out[o, i, j] = total
    return out


def _loop_softmax(values: List[float]) -> List[float]:
    top = max(values)
    exps = [math.exp(v - top) for v in values]
    total = sum(exps)
    return [e / total for e in exps]


def _loop_spatial_softmax(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    for c in range(x.shape[0]):
        flat = _loop_softmax(list(x[c].ravel()))
        out[c] = np.array(flat).reshape(x.shape[1:])
    return out


def _loop_linear(weight: np.ndarray, bias: np.ndarray, x: np.ndarray) -> np.ndarray:
    rows, cols = weight.shape
    return np.array([sum(weight[i, j] * x[j] for j in range(cols)) + bias[i] for i in range(rows)])


def _loop_sigmoid(x: np.ndarray) -> np.ndarray:
    return np.array([1.0 / (1.0 + math.exp(-v)) for v in x])


def _loop_attention_rows(queries: np.ndarray, memory: np.ndarray, scale: float) -> np.ndarray:
    rows = []
    for q in queries:
        weights = _loop_softmax([float(np.dot(q, m)) * scale for m in memory])
        rows.append(sum(w * m for w, m in zip(weights, memory)))
    return np.array(rows)


def _brute_force_metrics(
    preds: List[Optional[BoundingBox]],
    gts: List[Optional[BoundingBox]],
    thr: float,
    tau: float,
) -> Tuple[float, float, float, float]:
    def area_overlap(a: Optional[BoundingBox], b: Optional[BoundingBox]) -> float:
        if a is None or b is None:
            return 0.0
        w = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
        h = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
        inter = w * h if w > 0 and h > 0 else 0.0
        return inter / (a.w * a.h + b.w * b.h - inter)

    hits = successes = visible = predicted = 0
    pre_total = re_total = 0.0
    for p, g in zip(preds, gts):
        o = area_overlap(p, g)
        if p is not None:
            predicted += 1
            pre_total += o
        if g is None:
            continue
        visible += 1
        re_total += o
        if p is None:
            continue
        dx = p.x + p.w / 2 - g.x - g.w / 2
        dy = p.y + p.h / 2 - g.y - g.h / 2
        hits += math.sqrt(dx * dx + dy * dy) < thr
        successes += o >= tau
    pr = hits / visible if visible else 0.0
    sr = successes / visible if visible else 0.0
    pre = pre_total / predicted if predicted else 0.0
    re = re_total / visible if visible else 0.0
    return pr, sr, pre, re


# ============================================================================
# NUMKERNEL
# ============================================================================


@check("numkernel", "softmax [0, ln 2] = [1/3, 2/3]")
def _softmax_ln2() -> None:
    out = nk.softmax(np.array([0.0, math.log(2.0)]))
    expect_close(out[0], 1 / 3, 1e-15, "softmax[0]")
    expect_close(out[1], 2 / 3, 1e-15, "softmax[1]")


@check("numkernel", "softmax rows sum to 1 and are shift invariant")
def _softmax_invariants() -> None:
    rng = np.random.default_rng(0)
    x = rng.uniform(-50, 50, (200, 7))
    out = nk.softmax(x, axis=1)
    expect(np.max(np.abs(out.sum(axis=1) - 1.0)) <= 1e-12, "softmax rows do not sum to 1")
    shifted = nk.softmax(x + 13.0, axis=1)
    expect(np.max(np.abs(shifted - out)) <= 1e-12, "softmax is shift dependent")


@check("numkernel", "conv2d 3x3 ones, pad 1, constant input: interior = 9")
def _conv_ones() -> None:
    params = ConvParams.same(np.ones((1, 1, 3, 3)), np.zeros(1))
    out = nk.conv2d(np.ones((1, 5, 5)), params)
    expect(out[0, 2, 2] == 9.0, f"interior value {out[0, 2, 2]}")
    expect(out[0, 0, 0] == 4.0, f"corner value {out[0, 0, 0]}")


@check("numkernel", "conv2d matches a loop oracle; identity kernel is exact")
def _conv_oracle() -> None:
    rng = np.random.default_rng(1)
    x = rng.normal(size=(3, 6, 5))
    params = ConvParams.random(2, 3, 3, rng)
    oracle = _loop_conv(x, params.kernel, params.bias, 1)
    expect(np.max(np.abs(nk.conv2d(x, params) - oracle)) <= 1e-12, "conv2d differs from loops")
    expect(np.array_equal(nk.conv2d(x, ConvParams.identity(3)), x), "identity conv is not exact")


@check("numkernel", "avg_pool2d 2x2 over [[1,2],[3,4]] = 2.5; global pool")
def _pooling() -> None:
    x = np.array([[[1.0, 2.0], [3.0, 4.0]]])
    expect(nk.avg_pool2d(x, 2, 2)[0, 0, 0] == 2.5, "avg_pool2d mean")
    expect(nk.global_avg_pool(x)[0] == 2.5, "global_avg_pool mean")


@check("numkernel", "linear [[1,2],[3,4]] [1,1] = [3,7]")
def _linear() -> None:
    params = LinearParams(weight=np.array([[1.0, 2.0], [3.0, 4.0]]), bias=np.zeros(2))
    expect(np.array_equal(nk.linear(np.ones(2), params), np.array([3.0, 7.0])), "matvec")


@check("numkernel", "sigmoid(ln 3) = 0.75, gelu(1) = 0.841345")
def _activations() -> None:
    expect_close(float(nk.sigmoid(math.log(3.0))), 0.75, 1e-15, "sigmoid")
    expect_close(float(nk.gelu(1.0)), 0.5 * (1 + math.erf(1 / math.sqrt(2))), 1e-15, "gelu")
    expect_close(float(nk.gelu(1.0)), 0.841345, 1e-6, "gelu rounded")
    expect_close(float(nk.gelu(10.0)), 10.0, 1e-9, "gelu asymptote")


@check("numkernel", "matmul associativity")
def _matmul() -> None:
    rng = np.random.default_rng(2)
    a, b, c = rng.normal(size=(3, 4)), rng.normal(size=(4, 5)), rng.normal(size=(5, 2))
    left = nk.matmul(nk.matmul(a, b), c)
    right = nk.matmul(a, nk.matmul(b, c))
    expect(np.max(np.abs(left - right)) <= 1e-9, "matmul is not associative")


# ============================================================================
# FREQUENCY SELECTOR AND FUSION
# ============================================================================


@check("freq_selector", "high + low reconstructs the input")
def _reconstruction() -> None:
    rng = np.random.default_rng(3)
    for _ in range(100):
        c, h, w = rng.integers(1, 5), rng.integers(1, 9), rng.integers(1, 9)
        params = fs.FreqSelectorParams.random(int(c), rng)
        f = rng.normal(size=(c, h, w))
        pair = fs.decompose(f, params)
        expect(np.max(np.abs(pair.high + pair.low - f)) <= 1e-12, "reconstruction error")


@check("freq_selector", "1x1 map, identity conv: high = input, low = 0")
def _degenerate_decompose() -> None:
    params = fs.FreqSelectorParams(
        decomp_conv=ConvParams.identity(1),
        decomp_bn=BatchNormParams.unit(1),
        fc_global=LinearParams.identity(1),
        fc_high=LinearParams.identity(1),
        fc_low=LinearParams.identity(1),
    )
    f = np.array([[[3.5]]])
    pair = fs.decompose(f, params)
    expect(np.array_equal(pair.high, f) and np.array_equal(pair.low, np.zeros_like(f)), "split")


@check("freq_selector", "saturated gates select the high-frequency part")
def _gate_saturation() -> None:
    rng = np.random.default_rng(4)
    base = fs.FreqSelectorParams.random(2, rng)
    params = fs.FreqSelectorParams(
        decomp_conv=base.decomp_conv,
        decomp_bn=base.decomp_bn,
        fc_global=base.fc_global,
        fc_high=LinearParams(weight=np.zeros((2, 2)), bias=np.full(2, 20.0)),
        fc_low=LinearParams(weight=np.zeros((2, 2)), bias=np.full(2, -20.0)),
    )
    f = rng.normal(size=(2, 6, 6))
    pair = fs.decompose(f, params)
    out = fs.select_fuse(pair, params)
    expect(np.max(np.abs(out - pair.high)) <= 1e-8, "gated output differs from the high part")


@check("fusion", "FMFM 1-channel 2x2 case matches a step-by-step trace")
def _fmfm_trace() -> None:
    rng = np.random.default_rng(5)
    params = fusion.FmfmParams.random(1, rng)
    i_rgb, i_x = rng.normal(size=(1, 2, 2)), rng.normal(size=(1, 2, 2))

    def select(f: np.ndarray, p: fs.FreqSelectorParams) -> np.ndarray:
        pooled = np.array([[[f.mean()]]])
        logits = _loop_conv(pooled, p.decomp_conv.kernel, p.decomp_conv.bias, 1)
        bn = p.decomp_bn
        std = math.sqrt(bn.running_var[0] + bn.epsilon)
        logits = bn.gamma[0] * (logits - bn.running_mean[0]) / std + bn.beta[0]
        attention = np.ones_like(f) * _loop_spatial_softmax(logits)[0, 0, 0]
        high = f * attention
        low = f - high
        g = _loop_linear(p.fc_global.weight, p.fc_global.bias, np.array([(high + low).mean()]))
        gh = _loop_sigmoid(_loop_linear(p.fc_high.weight, p.fc_high.bias, g))[0]
        gl = _loop_sigmoid(_loop_linear(p.fc_low.weight, p.fc_low.bias, g))[0]
        return gh * high + gl * low

    m = params.mfm
    f_rgb = _loop_conv(select(i_rgb, params.freq_rgb), m.conv_rgb.kernel, m.conv_rgb.bias, 1)
    f_x = _loop_conv(select(i_x, params.freq_x), m.conv_x.kernel, m.conv_x.bias, 1)
    spatial = f_rgb * _loop_spatial_softmax(f_rgb) + f_x * _loop_spatial_softmax(f_x)
    f_g = np.array([(f_rgb + f_x).mean()])
    f_c = f_g * _loop_sigmoid(_loop_linear(m.fc_channel.weight, m.fc_channel.bias, f_g))
    expected = _loop_conv(spatial + f_c[0], m.conv_out.kernel, m.conv_out.bias, 1)

    actual = fusion.fmfm(i_rgb, i_x, params)
    expect(np.max(np.abs(actual - expected)) <= 1e-12, "FMFM differs from the trace")


@check("fusion", "inject adds the flattened prompt exactly")
def _inject_exact() -> None:
    rng = np.random.default_rng(6)
    search = rng.integers(-4, 5, (4, 3)).astype(float)
    template = rng.integers(-4, 5, (1, 3)).astype(float)
    sequence = TokenSequence.assemble(search, [template], np.zeros(3))
    prompts = [
        rng.integers(-4, 5, (3, 2, 2)).astype(float),
        rng.integers(-4, 5, (3, 1, 1)).astype(float),
    ]
    out = fusion.inject(prompts, sequence)
    expect(np.array_equal(out.tokens[:4] - search, prompts[0].reshape(3, -1).T), "search region")
    expect(np.array_equal(out.cue, sequence.cue), "cue slot was modified")


@check("fusion", "MFM modality symmetry")
def _mfm_symmetry() -> None:
    rng = np.random.default_rng(7)
    params = fusion.MfmParams.random(3, rng)
    swapped = fusion.MfmParams(
        conv_rgb=params.conv_x,
        conv_x=params.conv_rgb,
        fc_channel=params.fc_channel,
        conv_out=params.conv_out,
    )
    a, b = rng.normal(size=(3, 4, 4)), rng.normal(size=(3, 4, 4))
    diff = fusion.mfm(a, b, params) - fusion.mfm(b, a, swapped)
    expect(np.max(np.abs(diff)) <= 1e-12, "swapping modalities changed the output")


# ============================================================================
# MEMORY
# ============================================================================


def _bank(name: str, rows: np.ndarray, capacity: int = 8) -> MemoryBank:
    bank = MemoryBank(name, capacity, rows.shape[1])
    bank.replace(rows)
    return bank


@check("memory", "attn_update N=2, H=2 hand case")
def _attn_hand() -> None:
    target = _bank("long", np.array([[1.0, 0.0]]))
    source = _bank("short", np.array([[1.0, 0.0], [0.0, 1.0]]))
    attn_update(target, source)
    w = 1.0 / (1.0 + math.exp(-1.0 / math.sqrt(2.0)))
    expect_close(target.tokens[0, 0], 1.0 + w, 1e-15, "updated x")
    expect_close(target.tokens[0, 1], 1.0 - w, 1e-15, "updated y")
    expect_close(w, 0.6698, 1e-4, "attention weight")


@check("memory", "retrieve short {(2,0),(0,2)}, q=(1,0)")
def _retrieve_hand() -> None:
    pool = MemoryPool(2, FilterParams.identity(2), MemoryConfig(tiers=("short",)))
    pool.init(np.array([2.0, 0.0]))
    pool.push_short(np.array([0.0, 2.0]))
    cue, weights = pool.retrieve_with_weights(np.array([1.0, 0.0]))
    expect_close(weights["short"][0], 0.8808, 1e-4, "weight")
    expect_close(cue[0], 1.7616, 1e-4, "C_s x")
    expect_close(cue[1], 0.2384, 1e-4, "C_s y")


@check("memory", "init then update(c0): short [c0, c0], long and permanent 2 c0")
def _update_hand() -> None:
    c0 = np.array([0.5, -1.0, 2.0])
    pool = MemoryPool(3, FilterParams.identity(3))
    pool.init(c0)
    expect(np.array_equal(pool.retrieve(np.ones(3)), 3 * c0), "retrieve after init")
    pool.update(c0)
    expect(np.array_equal(pool.short.tokens, np.vstack([c0, c0])), "short tier")
    expect(np.allclose(pool.long.tokens, [2 * c0], atol=1e-15), "long tier")
    expect(np.allclose(pool.permanent.tokens, [2 * c0], atol=1e-15), "permanent tier")


@check("memory", "short tier keeps the last 8 pushes in order")
def _fifo() -> None:
    pool = MemoryPool(2, FilterParams.identity(2))
    pool.init(np.zeros(2))
    pushed = [np.array([float(i), -float(i)]) for i in range(1, 10)]
    for token in pushed:
        pool.push_short(token)
    expect(np.array_equal(pool.short.tokens, np.vstack(pushed[-8:])), "FIFO order")


@check("memory", "update and retrieve match a dense brute-force oracle")
def _memory_oracle() -> None:
    rng = np.random.default_rng(8)
    for _ in range(100):
        dim = int(rng.integers(1, 9))
        pool = MemoryPool(dim, FilterParams.identity(dim), MemoryConfig(capacities=(4, 4, 3)))
        short = [rng.normal(size=dim)]
        long_t = [short[0].copy()]
        perm = [short[0].copy()]
        pool.init(short[0])
        for _ in range(int(rng.integers(1, 6))):
            cue = rng.normal(size=dim)
            short = (short + [cue])[-4:]
            previous_long = np.array(long_t)
            scale = 1 / math.sqrt(dim)
            long_rows = np.array(long_t)
            long_t = list(long_rows + _loop_attention_rows(long_rows, np.array(short), scale))
            perm_rows = np.array(perm)
            perm = list(perm_rows + _loop_attention_rows(perm_rows, previous_long, scale))
            pool.update(cue)
        query = rng.normal(size=dim)
        expected = sum(
            _loop_attention_rows(query[None, :], np.array(tier), 1.0)[0]
            for tier in (short, long_t, perm)
        )
        expect(np.max(np.abs(pool.long.tokens - np.array(long_t))) <= 1e-12, "long tier")
        expect(np.max(np.abs(pool.permanent.tokens - np.array(perm))) <= 1e-12, "permanent tier")
        expect(np.max(np.abs(pool.retrieve(query) - expected)) <= 1e-12, "retrieve")


@check("memory", "filter H=4, r=2 equals the composed map")
def _filter_oracle() -> None:
    rng = np.random.default_rng(9)
    params = FilterParams.random(4, 2, rng)
    c = rng.normal(size=4)
    hidden = _loop_linear(params.down.weight, params.down.bias, c)
    hidden = np.array([v * 0.5 * (1 + math.erf(v / math.sqrt(2))) for v in hidden])
    expected = _loop_linear(params.up.weight, params.up.bias, hidden)
    expect(np.max(np.abs(filter_cue(c, params) - expected)) <= 1e-12, "filter output")


# ============================================================================
# LOSSES
# ============================================================================


@check("losses", "focal_loss(p=0.5, alpha=0.25, gamma=2) = 0.0433217")
def _focal_value() -> None:
    expect_close(losses.focal_loss([0.5], [1]), 0.25 * 0.25 * math.log(2.0), 1e-15, "focal")
    expect_close(losses.focal_loss([0.5], [1]), 0.0433217, 1e-6, "focal rounded")


@check("losses", "regression loss of (0,0,1,1) vs (2,2,1,1) = 23.5556")
def _regression_value() -> None:
    a = BoundingBox(x=0, y=0, w=1, h=1)
    b = BoundingBox(x=2, y=2, w=1, h=1)
    expect_close(losses.giou(a, b), -7 / 9, 1e-15, "GIoU")
    expect_close(losses.regression_loss(a, b), 20 + 2 * 16 / 9, 1e-12, "loss")
    expect(losses.regression_loss(a, a) == 0.0, "identical boxes give a non-zero loss")


@check("losses", "analytic gradients match central differences")
def _gradients() -> None:
    rng = np.random.default_rng(10)
    cfg = LossConfig()
    h = 1e-6
    for _ in range(20):
        target = BoundingBox.from_array(
            np.concatenate([rng.uniform(0, 10, 2), rng.uniform(1, 5, 2)])
        )
        predicted = target.as_array() + rng.uniform(0.1, 2.0, 4) * rng.choice([-1, 1], 4)
        predicted[2:] = np.maximum(predicted[2:], 0.5)
        probabilities = rng.uniform(0.05, 0.95, 3)
        labels = rng.integers(0, 2, 3)
        grads = losses.loss_gradients(
            target, BoundingBox.from_array(predicted), cfg, probabilities, labels
        )
        for i in range(4):
            up, down = predicted.copy(), predicted.copy()
            up[i] += h
            down[i] -= h
            numeric = (
                losses.regression_loss(target, BoundingBox.from_array(up))
                - losses.regression_loss(target, BoundingBox.from_array(down))
            ) / (2 * h)
            rel = abs(grads.box[i] - numeric) / max(abs(numeric), 1.0)
            expect(rel <= 1e-5, f"box component {i}: analytic {grads.box[i]}, numeric {numeric}")
        assert grads.probabilities is not None
        for i in range(3):
            up_p, down_p = probabilities.copy(), probabilities.copy()
            up_p[i] += h
            down_p[i] -= h
            numeric = (
                losses.focal_loss(up_p, labels) - losses.focal_loss(down_p, labels)
            ) / (2 * h)
            rel = abs(grads.probabilities[i] - numeric) / max(abs(numeric), 1.0)
            analytic = grads.probabilities[i]
            expect(rel <= 1e-5, f"probability {i}: analytic {analytic}, numeric {numeric}")


# ============================================================================
# METRICS
# ============================================================================


@check("metrics", "IoU (0,0,2,2) vs (1,0,2,2) = 1/3")
def _iou_value() -> None:
    a, b = BoundingBox(x=0, y=0, w=2, h=2), BoundingBox(x=1, y=0, w=2, h=2)
    expect_close(metrics.iou(a, b), 1 / 3, 1e-15, "IoU")


@check("metrics", "PR of centre errors [5, 25, 10, 30] at 20 = 0.5; SR [0.2, 0.6, 0.8] = 2/3")
def _pr_sr_values() -> None:
    gt = [BoundingBox(x=0, y=0, w=4, h=4)] * 4
    preds = [BoundingBox(x=d, y=0, w=4, h=4) for d in (5, 25, 10, 30)]
    expect(metrics.precision_rate(preds, gt) == 0.5, "PR")
    gt3 = [BoundingBox(x=0, y=0, w=10, h=1)] * 3
    # widths chosen so that IoU = w / 10
    preds3 = [BoundingBox(x=0, y=0, w=w, h=1) for w in (2.0, 6.0, 8.0)]
    expect_close(metrics.success_rate(preds3, gt3, 0.5), 2 / 3, 1e-15, "SR")


@check("metrics", "4-frame long-term case: Pre = Re = F = 0.5")
def _prf_hand() -> None:
    box = BoundingBox(x=0, y=0, w=2, h=2)
    half = BoundingBox(x=0, y=0, w=1, h=2)
    preds = [None, half, box, box]
    gts = [box, box, box, None]
    prf = metrics.precision_recall_f(preds, gts)
    expect(prf.precision == 0.5 and prf.recall == 0.5 and prf.f_score == 0.5, str(prf))


@check("metrics", "PR/SR/Pre/Re match brute-force counting on a 4x4 grid")
def _metrics_grid() -> None:
    rng = np.random.default_rng(11)
    grid: List[Optional[BoundingBox]] = [
        BoundingBox(x=x, y=y, w=side, h=side)
        for x, y in itertools.product(range(4), repeat=2)
        for side in (1, 2)
    ]
    # Index len(grid) draws an absent box.
    grid.append(None)
    for _ in range(10_000):
        n = int(rng.integers(1, 7))
        preds = [grid[i] for i in rng.integers(0, len(grid), n)]
        gts = [grid[i] for i in rng.integers(0, len(grid), n)]
        pr, sr, pre, re = _brute_force_metrics(preds, gts, 1.5, 0.25)
        expect_close(metrics.precision_rate(preds, gts, 1.5), pr, 1e-15, "PR")
        expect_close(metrics.success_rate(preds, gts, 0.25), sr, 1e-15, "SR")
        prf = metrics.precision_recall_f(preds, gts)
        expect_close(prf.precision, pre, 1e-12, "Pre")
        expect_close(prf.recall, re, 1e-12, "Re")


# ============================================================================
# SYNTHGEN AND PIPELINE
# ============================================================================


@check("synthgen", "linear path advances 1 px per frame; same seed is bit-identical")
def _synthgen() -> None:
    scene = SceneConfig(
        image_size=32, n_frames=10, target_size=(6, 6), start=(2, 10), velocity=(1, 0)
    )
    first, second = synthgen.generate(scene), synthgen.generate(scene)
    centres = [box.center[0] for box in first.groundtruth if box is not None]
    expect(all(b - a == 1.0 for a, b in zip(centres, centres[1:])), "centre step")
    expect(
        all(
            np.array_equal(a.rgb, b.rgb) and np.array_equal(a.aux, b.aux)
            for a, b in zip(first.frames, second.frames)
        ),
        "generation is not deterministic",
    )


@check("pipeline", "embed 2x2 image, patch 1, identity projection = pixels")
def _embed_hand() -> None:
    image = np.array([[[1.0, 2.0], [3.0, 4.0]]])
    params = enc.EncoderParams(
        patch_embed=LinearParams.identity(1),
        blocks=(enc.BlockParams.random(1, np.random.default_rng(0)),),
        patch_size=1,
    )
    expected = np.array([[1.0], [2.0], [3.0], [4.0]])
    expect(np.array_equal(enc.embed(image, params), expected), "tokens")


def _small_config(**adapter: object) -> RunConfig:
    return RunConfig(
        scene=SceneConfig(
            image_size=16, n_frames=5, target_size=(4, 4), start=(4, 4), velocity=(1, 0.5)
        ),
        encoder=EncoderConfig(layers=1, hidden=8, patch_size=4, template_size=8),
        adapter=AdapterConfig(**adapter),  # type: ignore[arg-type]
    )


@check("pipeline", "zero adapters and filter reproduce the surrogate-only boxes")
def _adapter_off() -> None:
    config = _small_config()
    sequence = synthgen.generate(config.scene)
    params = TrackerParams.initialize(config).with_adapter(AdapterParams.zeros(config))
    reference_config = _small_config(fusion="none")

    def track(cfg: RunConfig) -> List[BoundingBox]:
        session = TrackerSession(params, cfg)
        first = sequence.groundtruth[0]
        assert first is not None
        session.initialize(sequence.frames[0], first)
        return [session.track_frame(frame) for frame in sequence.frames[1:]]

    expect(track(config) == track(reference_config), "boxes differ")


@check("config", "default config survives the document codec")
def _config_roundtrip() -> None:
    config = RunConfig()
    expect(parse_run_config(dump_run_config(config)) == config, "round trip changed the config")


# ============================================================================
# RUNNER
# ============================================================================


def run_selftest(config_path: Optional[str] = None) -> SelfTestResult:
    """
    Run every registered check, plus validation of ``config_path`` if given.

    Returns:
        SelfTestResult; ``passed`` is True iff every check passed
    """
    result = SelfTestResult()
    if config_path is not None:
        start = time.perf_counter()
        try:
            load_run_config(config_path)
            result.outcomes.append(CheckOutcome("config", f"validate {config_path}", True))
        except ConfigurationError as e:
            result.outcomes.append(
                CheckOutcome(
                    "config",
                    f"validate {config_path}",
                    False,
                    e.message,
                    time.perf_counter() - start,
                )
            )

    for module, name, func in _CHECKS:
        start = time.perf_counter()
        try:
            func()
            outcome = CheckOutcome(module, name, True)
        except (SelfTestFailure, TrackerError, AssertionError, ArithmeticError, ValueError) as e:
            outcome = CheckOutcome(module, name, False, f"{type(e).__name__}: {e}")
        outcome.seconds = time.perf_counter() - start
        result.outcomes.append(outcome)
        if not outcome.passed:
            logger.warning("Selftest check failed", extra={"check": name, "detail": outcome.detail})

    logger.info(
        "Selftest finished",
        extra={"checks": len(result.outcomes), "failed": len(result.failures)},
    )
    return result
