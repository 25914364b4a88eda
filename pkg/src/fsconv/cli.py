"""Command-line surface: compression planner, conv runner/comparator,
quantizer, gradient checker and benchmark reporter.

All reports are structured text on stdout (space-separated key=value
tokens, one record per line); diagnostics go to stderr. Exit codes:
0 success, 1 verification failure, 2 malformed input.
"""

from __future__ import annotations

import argparse
import sys
import time
import warnings
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .counters import MultCounter
from .dfs import extract_fractional, grad_alpha, grad_summary, init_alphas, locate, locate_grad
from .errors import (
    DegenerateStrideError,
    FilterSummaryError,
    FormatError,
    InvalidRatioError,
    UnsupportedGeometryError,
)
from .fcfs import fcfs_conv
from .formats import (
    ArchSpec,
    BatchNormSpec,
    ConvSpec,
    DenseSpec,
    ModelLayer,
    bundled_arch,
    read_arch,
    read_model,
    write_model,
)
from .geometry import (
    ConvGeometry,
    StridePolicy,
    count_params,
    derive_layout,
    predicted_acceleration,
)
from .oracle import naive_conv
from .quant import effective_params, quantize
from .tensors import FeatureMap, FilterSummary, unwrap

OK, FAIL, BAD_INPUT = 0, 1, 2


def _fmt(value) -> str:
    if isinstance(value, Fraction):
        value = float(value)
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _emit(record: str, **fields) -> None:
    tokens = [record] + [f"{k}={_fmt(v)}" for k, v in fields.items()]
    print(" ".join(tokens))


def _resolve_arch(name: str) -> Path:
    path = Path(name)
    if path.exists():
        return path
    if path.suffix == "" and "/" not in name:
        try:
            return bundled_arch(name)
        except FileNotFoundError:
            pass
    raise FormatError(f"architecture file {name!r} not found")


def _resolve_conv_settings(arch: ArchSpec, layer: ConvSpec, args):
    ratio = layer.ratio
    if ratio is None and args.ratio is not None:
        ratio = Fraction(args.ratio)
    if ratio is None:
        ratio = arch.default_ratio
    if ratio is None:
        raise FormatError(
            f"layer {layer.name!r} has no ratio; set r= in the file or pass --ratio"
        )
    policy = layer.policy
    if policy is None and args.policy is not None:
        policy = StridePolicy(args.policy)
    if policy is None:
        policy = arch.default_policy
    if policy is None:
        policy = StridePolicy.CHANNEL_ALIGNED
    return ratio, policy


def _rel_dev(a: np.ndarray, b: np.ndarray) -> float:
    scale = float(np.max(np.abs(b))) if b.size else 0.0
    if scale == 0.0:
        return float(np.max(np.abs(a - b))) if a.size else 0.0
    return float(np.max(np.abs(a - b))) / scale


# --- plan --------------------------------------------------------------------


def cmd_plan(args) -> int:
    arch_path = _resolve_arch(args.arch)
    arch = read_arch(arch_path)
    _emit("plan", file=arch_path, layers=len(arch.layers))
    baseline_total = 0
    fsnet_total = 0
    for layer in arch.layers:
        if isinstance(layer, BatchNormSpec):
            _emit("layer", name=layer.name, kind="bn", params=layer.params)
            baseline_total += layer.params
            fsnet_total += layer.params
            continue
        if isinstance(layer, DenseSpec):
            _emit(
                "layer",
                name=layer.name,
                kind="fc",
                **{"in": layer.fan_in},
                out=layer.fan_out,
                bias=int(layer.bias),
                params=layer.params,
            )
            baseline_total += layer.params
            fsnet_total += layer.params
            continue
        ratio, policy = _resolve_conv_settings(arch, layer, args)
        fields = dict(
            name=layer.name,
            kind="conv",
            c_in=layer.c_in,
            s1=layer.s1,
            s2=layer.s2,
            c_out=layer.c_out,
            r=ratio,
            policy=policy.value,
        )
        try:
            geom = ConvGeometry(layer.c_in, layer.s1, layer.s2, layer.c_out, ratio, policy)
            layout = derive_layout(geom)
        except (DegenerateStrideError, InvalidRatioError) as exc:
            # surfaced per layer, not fatal: the layer stays uncompressed
            kind = "degenerate_stride" if isinstance(exc, DegenerateStrideError) else "invalid_ratio"
            baseline = layer.c_in * layer.s1 * layer.s2 * layer.c_out
            _emit("layer", **fields, error=kind, baseline=baseline, fs=baseline)
            baseline_total += baseline
            fsnet_total += baseline
            continue
        params = count_params(geom, layout)
        fields.update(
            K=geom.filter_len,
            L=layout.length,
            s=layout.stride,
            phys=layout.phys_length,
            baseline=params.baseline,
            fs=params.fs,
            cr=params.cr,
            cr_nominal=params.cr_nominal,
        )
        pred = predicted_acceleration(geom, layout, 1, 1)
        fields["accelerable"] = int(pred.accelerable)
        if pred.accelerable:
            fields["pred_ratio"] = pred.ratio
        _emit("layer", **fields)
        baseline_total += params.baseline
        fsnet_total += params.fs
    _emit(
        "total",
        baseline=baseline_total,
        fsnet=fsnet_total,
        cr=Fraction(baseline_total, fsnet_total),
    )
    return OK


# --- conv --------------------------------------------------------------------


def _load_input(path) -> np.ndarray:
    try:
        arr = np.load(path)
    except (OSError, ValueError) as exc:
        raise FormatError(f"cannot read input tensor {path!r}: {exc}") from exc
    if arr.ndim != 3:
        raise FormatError(f"input tensor must be 3D (c_in, d1, d2), got shape {arr.shape}")
    return arr


def _fcfs_or_fallback(fs, fmap, name):
    try:
        return fcfs_conv(fs, fmap), False
    except UnsupportedGeometryError:
        print(f"warning layer={name} s2=1 fcfs_unsupported fallback=naive", file=sys.stderr)
        counter = MultCounter()
        out = naive_conv(fs, fmap, counter)
        return (out, counter), True


def cmd_conv(args) -> int:
    layers = read_model(args.model)
    if not layers:
        raise FormatError("model has no layers")
    fmap = unwrap(_load_input(args.input))
    status = OK
    _emit("conv", model=args.model, input=args.input, engine=args.engine, tolerance=args.tolerance)
    current = fmap
    output = None
    for layer in layers:
        fs = layer.summary()
        fields = dict(name=layer.name, engine=args.engine)
        if args.engine == "naive":
            counter = MultCounter()
            output = naive_conv(fs, current, counter)
            fields.update(naive_mults=counter.multiplies)
        elif args.engine == "fcfs":
            (output, counter), fell_back = _fcfs_or_fallback(fs, current, layer.name)
            fields.update(
                fcfs_mults=counter.multiplies,
                fcfs_lookups=counter.lookups,
                fallback=int(fell_back),
            )
        else:
            naive_counter = MultCounter()
            reference = naive_conv(fs, current, naive_counter)
            (fast, fast_counter), fell_back = _fcfs_or_fallback(fs, current, layer.name)
            dev = _rel_dev(fast.data, reference.data)
            fields.update(
                dev=dev,
                naive_mults=naive_counter.multiplies,
                fcfs_mults=fast_counter.multiplies,
                fcfs_lookups=fast_counter.lookups,
                fallback=int(fell_back),
            )
            if dev > args.tolerance:
                status = FAIL
            output = reference
        _emit("layer", **fields)
        current = FeatureMap(output.c_out, output.d1, output.d2, output.data)
    out_path = args.output or str(Path(args.input).with_suffix("")) + ".out.npy"
    np.save(out_path, output.as_3d())
    _emit("output", file=out_path, shape=f"{output.c_out}x{output.d1}x{output.d2}")
    _emit("status", ok=int(status == OK))
    return status


# --- quantize ------------------------------------------------------------------


def cmd_quantize(args) -> int:
    layers = read_model(args.model)
    out_path = args.output or str(Path(args.model).with_suffix("")) + f".q{args.bits}.fsn"
    _emit("quantize", model=args.model, bits=args.bits, output=out_path)
    new_layers = []
    sizes = []
    float_total = 0
    for layer in layers:
        phys = layer.layout.phys_length
        float_total += phys
        if layer.dtype != "f32":
            print(f"warning layer={layer.name} already_quantized={layer.dtype}", file=sys.stderr)
            new_layers.append(layer)
            sizes.append((phys, layer.quant.nbits))
            _emit("layer", name=layer.name, skipped=layer.dtype)
            continue
        q = quantize(layer.weights, args.bits)
        sizes.append((phys, args.bits))
        new_layers.append(
            ModelLayer(
                layer.name,
                layer.geom,
                dtype=f"q{args.bits}",
                quant=q,
                alphas=layer.alphas,
            )
        )
        _emit(
            "layer",
            name=layer.name,
            tau=q.tau,
            w_min=q.w_min,
            w_max=q.w_max,
            float_params=phys,
            effective_params=effective_params([(phys, args.bits)]),
        )
    write_model(out_path, new_layers)
    effective_total = effective_params(sizes)
    _emit(
        "total",
        float_params=float_total,
        effective_params=effective_total,
        ratio=Fraction(float_total) / effective_total,
    )
    _emit("status", ok=1)
    return OK


# --- gradcheck ----------------------------------------------------------------


def _central_diff(f, x: float, step: float, tol: float) -> tuple[float, float]:
    """Central difference plus the denominator for a relative comparison.

    A central difference cannot resolve below ~eps*|f|/step, so components
    smaller than that are measured against the resolution floor instead of
    their own (noise-dominated) magnitude; everything FD can resolve at
    `tol` is still compared at `tol` relative.
    """
    hi = f(x + step)
    lo = f(x - step)
    fd = (hi - lo) / (2.0 * step)
    noise = 64.0 * np.finfo(np.float64).eps * max(abs(hi), abs(lo)) / step
    return fd, max(abs(fd), noise / tol)


def cmd_gradcheck(args) -> int:
    layers = read_model(args.model)
    rng = np.random.default_rng(args.seed)
    _emit(
        "gradcheck",
        model=args.model,
        seed=args.seed,
        points=args.points,
        tolerance=args.tolerance,
        step=args.step,
    )
    status = OK
    for layer in layers:
        fs64 = FilterSummary(
            layer.geom, layer.layout, layer.summary().weights.astype(np.float64)
        )
        k = layer.geom.filter_len
        length = layer.layout.length
        if length <= k + 1:
            _emit("layer", name=layer.name, error="fs_too_short")
            continue
        alphas = layer.alphas if layer.alphas is not None else init_alphas(fs64)
        # sample around the model's operating points but inside healthy
        # sigmoid territory (clipped init targets can sit at alpha ~ -20,
        # where every location rounds to an integer and gets flagged)
        base = float(np.clip(np.mean(alphas), -3.0, 3.0))

        alpha_err = 0.0
        summary_err = 0.0
        checked = flagged = 0
        attempts = 0
        while checked < args.points and attempts < 50 * args.points:
            attempts += 1
            alpha = base + float(rng.uniform(-4.0, 4.0))
            loc = locate(alpha, length, k)
            # an FD step must not cross an interpolation cell boundary
            guard = max(2.0 * locate_grad(alpha, length, k) * args.step, 1e-9)
            if abs(loc - round(loc)) <= guard:
                flagged += 1
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    grad_alpha(fs64, alpha, np.ones(k))
                continue
            upstream = rng.standard_normal(k)
            analytic = grad_alpha(fs64, alpha, upstream)
            fd, denom = _central_diff(
                lambda a: float(upstream @ extract_fractional(fs64, locate(a, length, k))),
                alpha,
                args.step,
                args.tolerance,
            )
            alpha_err = max(alpha_err, abs(analytic - fd) / denom)

            grad = grad_summary(fs64, loc, upstream)
            cell = int(np.floor(loc))
            for idx in range(cell, cell + k + 1):
                def bumped_value(w):
                    summary = fs64.weights.copy()
                    summary[idx] = w
                    return float(upstream @ extract_fractional(
                        FilterSummary(layer.geom, layer.layout, summary), loc
                    ))

                fd_w, denom_w = _central_diff(
                    bumped_value, float(fs64.weights[idx]), 1e-6, args.tolerance
                )
                summary_err = max(summary_err, abs(grad[idx] - fd_w) / denom_w)
            checked += 1
        ok = alpha_err <= args.tolerance and summary_err <= args.tolerance
        if not ok:
            status = FAIL
        _emit(
            "layer",
            name=layer.name,
            alpha_err=alpha_err,
            summary_err=summary_err,
            checked=checked,
            flagged=flagged,
            status="pass" if ok else "fail",
        )
    _emit("status", ok=int(status == OK))
    return status


# --- bench --------------------------------------------------------------------


def _time_best(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best * 1e3


def cmd_bench(args) -> int:
    arch_path = _resolve_arch(args.arch)
    arch = read_arch(arch_path)
    d1, d2 = args.spatial
    _emit("bench", file=arch_path, spatial=f"{d1}x{d2}", repeat=args.repeat, seed=args.seed)
    for index, layer in enumerate(arch.layers):
        if not isinstance(layer, ConvSpec):
            continue
        ratio, policy = _resolve_conv_settings(arch, layer, args)
        try:
            geom = ConvGeometry(layer.c_in, layer.s1, layer.s2, layer.c_out, ratio, policy)
            layout = derive_layout(geom)
        except (DegenerateStrideError, InvalidRatioError) as exc:
            _emit("layer", name=layer.name, skipped=type(exc).__name__)
            continue
        if geom.s2 == 1:
            _emit("layer", name=layer.name, skipped="s2_is_1")
            continue
        if d1 == 1 and d2 == 1 and geom.s1 == 1:
            _emit("layer", name=layer.name, skipped="trivial_1x1_output")
            continue
        fs = FilterSummary.random(geom, seed=args.seed + index)
        fmap = FeatureMap.random(geom.c_in, d1, d2, seed=args.seed + index + 1)
        naive_counter = MultCounter()
        reference = naive_conv(fs, fmap, naive_counter)
        fast, fast_counter = fcfs_conv(fs, fmap)
        naive_ms = _time_best(lambda: naive_conv(fs, fmap), args.repeat)
        fcfs_ms = _time_best(lambda: fcfs_conv(fs, fmap), args.repeat)
        pred = predicted_acceleration(geom, layout, d1, d2)
        measured = Fraction(
            naive_counter.multiplies, fast_counter.multiplies + fast_counter.lookups
        )
        _emit(
            "layer",
            name=layer.name,
            naive_mults=naive_counter.multiplies,
            fcfs_mults=fast_counter.multiplies,
            fcfs_lookups=fast_counter.lookups,
            measured=measured,
            predicted=pred.ratio,
            naive_ms=naive_ms,
            fcfs_ms=fcfs_ms,
            dev=_rel_dev(fast.data, reference.data),
        )
    _emit("status", ok=1)
    return OK


# --- entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fsconv",
        description="Weight-shared convolution toolkit: plan, run, quantize, check.",
    )
    parser.add_argument("--version", action="version", version=f"fsconv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    plan = sub.add_parser("plan", help="per-layer layout and parameter report")
    plan.add_argument("arch", help="architecture file (or bundled name, e.g. resnet110)")
    plan.add_argument("--ratio", help="compression ratio for layers without r=")
    plan.add_argument("--policy", choices=[p.value for p in StridePolicy])
    plan.set_defaults(func=cmd_plan)

    conv = sub.add_parser("conv", help="run a model on an input tensor")
    conv.add_argument("model", help="model file (FSN1)")
    conv.add_argument("input", help=".npy input tensor of shape (c_in, d1, d2)")
    conv.add_argument("--engine", choices=("naive", "fcfs", "both"), default="both")
    conv.add_argument("--output", help="output .npy path")
    conv.add_argument("--tolerance", type=float, default=1e-5)
    conv.set_defaults(func=cmd_conv)

    quant = sub.add_parser("quantize", help="linear-quantize every layer of a model")
    quant.add_argument("model")
    quant.add_argument("--bits", type=int, choices=(4, 8), default=8)
    quant.add_argument("--output", help="quantized model path")
    quant.set_defaults(func=cmd_quantize)

    grad = sub.add_parser("gradcheck", help="finite-difference check of location gradients")
    grad.add_argument("model")
    grad.add_argument("--seed", type=int, default=0)
    grad.add_argument("--points", type=int, default=100)
    grad.add_argument("--tolerance", type=float, default=1e-6)
    grad.add_argument("--step", type=float, default=1e-5)
    grad.set_defaults(func=cmd_gradcheck)

    bench = sub.add_parser("bench", help="multiply counts and wall clock, both engines")
    bench.add_argument("arch")
    bench.add_argument("--ratio")
    bench.add_argument("--policy", choices=[p.value for p in StridePolicy])
    bench.add_argument("--spatial", type=int, nargs=2, default=(16, 16), metavar=("D1", "D2"))
    bench.add_argument("--repeat", type=int, default=3)
    bench.add_argument("--seed", type=int, default=0)
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FilterSummaryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BAD_INPUT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
