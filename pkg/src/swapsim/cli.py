"""Command-line surface.

Subcommands: verify-kernels, calibrate, dse, simulate, compare. Every
command is a pure function of its config file and flags; repeated runs
write byte-identical outputs. Exit codes: 0 success, 2 validation or
format failure, 3 kernel verification mismatch, 4 no feasible design.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import attention, dse, io, perf, tlmm
from .config import ConfigError, ToolConfig, load_config

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_MISMATCH = 3
EXIT_INFEASIBLE = 4

ATTN_TOL = 1e-4
PERMUTATION_TOL = 1e-6


def _parse_sizes(spec: str) -> list[tuple[int, int]]:
    sizes = []
    for item in spec.split(","):
        try:
            r, c = item.lower().split("x")
            sizes.append((int(r), int(c)))
        except ValueError:
            raise ConfigError(f"--sizes: expected ROWSxCOLS entries, got {item!r}") from None
    return sizes


def _parse_sweep(spec: str) -> list[int]:
    try:
        return [int(tok) for tok in spec.split(",")]
    except ValueError:
        raise ConfigError(f"--sweep: expected comma-separated integers, got {spec!r}") from None


def cmd_verify_kernels(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    sizes = _parse_sizes(args.sizes)
    failed = False

    tlmm_max = 0
    for rows, cols in sizes:
        w = tlmm.TernaryMatrix.from_array(rng.integers(-1, 2, size=(rows, cols)))
        x = tlmm.ActivationVector(rng.integers(-128, 128, size=cols))
        packed = tlmm.pack_weights(w, group_size=int(rng.integers(1, 7)))
        if args.inject_fault:
            corrupted = packed.packed.copy()
            corrupted[0, 0] = (corrupted[0, 0] + 1) % 3**packed.group_size
            packed = tlmm.PackedWeights(packed.rows, packed.cols, packed.group_size, corrupted)
        err = int(np.abs(tlmm.tlmm_gemv(packed, x) - tlmm.naive_ternary_gemv(w, x)).max())
        tlmm_max = max(tlmm_max, err)
    print(f"tlmm: cases={len(sizes)} max_abs_err={tlmm_max}")
    failed |= tlmm_max != 0

    attn_max = 0.0
    for rows, cols in sizes:
        n, d = min(rows, 512), min(max(cols, 8), 64)
        inp = attention.AttentionInputs(
            rng.standard_normal((n, d)), rng.standard_normal((n, d)), rng.standard_normal((n, d))
        )
        block = 16
        schedule = attention.make_reverse_schedule(-(-n // block), n_pe=4, block_size=block)
        out = attention.flash_attention_prefill(inp, schedule)
        err = float(np.abs(out - attention.naive_attention(inp)).max())
        attn_max = max(attn_max, err)
    print(f"attention: cases={len(sizes)} max_abs_err={attn_max:.3e}")
    failed |= attn_max > ATTN_TOL

    dec_max = 0.0
    for rows, cols in sizes:
        t, d = min(rows, 1024), min(max(cols, 8), 64)
        cache = attention.KVCache(rng.standard_normal((t, d)), rng.standard_normal((t, d)))
        q = rng.standard_normal(d)
        out = attention.decode_attention(q, cache)
        err = float(np.abs(out - attention.naive_single_query(q, cache.k_hist, cache.v_hist)).max())
        dec_max = max(dec_max, err)
    print(f"decode: cases={len(sizes)} max_abs_err={dec_max:.3e}")
    failed |= dec_max > ATTN_TOL

    if failed:
        print("verification FAILED", file=sys.stderr)
        return EXIT_MISMATCH
    print("verification passed")
    return EXIT_OK


def _load_tool_config(args: argparse.Namespace) -> ToolConfig:
    if not args.config:
        raise ConfigError("--config: required for this command")
    return load_config(args.config)


def cmd_calibrate(args: argparse.Namespace) -> int:
    cfg = _load_tool_config(args)
    if cfg.measurements_path is None:
        raise ConfigError("calibration.measurements: required for the calibrate command")
    measurements = io.read_measurements_csv(cfg.measurements_path)
    result = perf.calibrate(measurements, cfg.baseline_config())
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    io.save_model(out_dir / "model.yaml", result.model)
    lines = [f"{k} = {v:.9g}" for k, v in result.model.coefficients().items()]
    lines.append(f"max_abs_residual_s = {result.max_abs_residual:.9g}")
    report = "\n".join(lines) + "\n"
    (out_dir / "calibration_report.txt").write_text(report)
    print(report, end="")
    return EXIT_OK


def cmd_dse(args: argparse.Namespace) -> int:
    cfg = _load_tool_config(args)
    model = io.load_model(args.model)
    dse_cfg = cfg.dse_config(model, alpha=args.alpha)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.shrink:
        result = dse.search_with_shrink(dse_cfg, model)
    else:
        result = dse.search(dse_cfg, model)

    io.write_dse_csv(out_dir / "dse_points.csv", result)
    if not result.feasible_found:
        (out_dir / "dse_report.txt").write_text("no feasible design\n")
        print("no feasible design", file=sys.stderr)
        return EXIT_INFEASIBLE

    best = result.best
    io.save_design(out_dir / "best_design.yaml", best)
    lines = [
        f"alpha = {dse_cfg.alpha:.9g}",
        f"objective_s = {result.objective:.9g}",
        f"proj_parallelism = {best.proj_parallelism}",
        f"pe_count_pre = {best.pe_count_pre}",
        f"pe_count_dec = {best.pe_count_dec}",
        f"pareto_size = {len(result.pareto)}",
        f"evaluated = {len(result.evaluated)}",
        f"infeasible = {result.infeasible_count}",
    ]
    for d, reason in result.shrink_trace:
        lines.append(f"shrink: {reason}")
    report = "\n".join(lines) + "\n"
    (out_dir / "dse_report.txt").write_text(report)
    print(report, end="")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    from . import simulate as sim

    cfg = _load_tool_config(args)
    model = io.load_model(args.model)
    design = io.load_design(args.design)
    shape = cfg.model.shape()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    result = sim.simulate_end_to_end(
        model, shape, design, cfg.model.l_prefill, cfg.model.n_gen, cfg.reconfig
    )
    io.write_timeline_csv(out_dir / "timeline.csv", result.timeline)
    report = sim.overhead_report(result.timeline, cfg.reconfig)

    sweep = _parse_sweep(args.sweep) if args.sweep else list(cfg.model.l_sweep)
    rows = []
    for l_prompt in sweep:
        r = sim.simulate_end_to_end(model, shape, design, l_prompt, cfg.model.n_gen, cfg.reconfig)
        rows.append({"l": float(l_prompt), "ttft_s": r.ttft, "decode_throughput_tps": r.decode_throughput})
    io.write_csv(out_dir / "curves.csv", ("l", "ttft_s", "decode_throughput_tps"), rows)

    print(f"ttft_s = {result.ttft:.9g}")
    print(f"decode_throughput_tps = {result.decode_throughput:.9g}")
    print(f"exposed_ms = {report['exposed_ms']:.9g}")
    print(f"hidden_fraction = {report['hidden_fraction']:.9g}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    from . import simulate as sim

    cfg = _load_tool_config(args)
    cand_model = io.load_model(args.model)
    cand_design = io.load_design(args.design)
    base_model = io.load_model(args.baseline_model)
    base_design = io.load_design(args.baseline_design)
    sweep = _parse_sweep(args.sweep) if args.sweep else list(cfg.model.l_sweep)
    rows = sim.compare_designs(
        (base_model, base_design, None),  # static baseline: no swap
        (cand_model, cand_design, cfg.reconfig),
        sweep,
        cfg.model.shape(),
        n_gen=cfg.model.n_gen,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    io.write_compare_csv(out_dir / "compare.csv", rows)
    for row in rows:
        print(f"l={int(row['l'])} throughput_ratio={row['throughput_ratio']:.4g} ttft_ratio={row['ttft_ratio']:.4g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swapsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-kernels", help="run the kernel oracle suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sizes", default="1x1,64x160,256x1024,512x2048", help="ROWSxCOLS list")
    p.add_argument("--inject-fault", action="store_true", help="corrupt packed weights to prove detection")
    p.set_defaults(func=cmd_verify_kernels)

    p = sub.add_parser("calibrate", help="fit the latency model from measurements")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("dse", help="search the design grid")
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True, help="calibrated model YAML")
    p.add_argument("--alpha", type=float, default=None, help="override the objective weight")
    p.add_argument("--shrink", action="store_true", help="search unmargined, then shrink to the margin")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_dse)

    p = sub.add_parser("simulate", help="emit the swap timeline and sweep curves")
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--design", required=True)
    p.add_argument("--sweep", default=None, help="comma-separated prompt lengths")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="sweep two designs and tabulate ratios")
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True, help="candidate model YAML")
    p.add_argument("--design", required=True, help="candidate design YAML")
    p.add_argument("--baseline-model", required=True)
    p.add_argument("--baseline-design", required=True)
    p.add_argument("--sweep", default=None)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, io.FormatError, perf.CalibrationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (dse.InfeasibleDesignError, dse.NoRoutableDesignError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
