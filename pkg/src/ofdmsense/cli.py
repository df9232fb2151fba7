"""Command-line front end: angle spectrum, sweeps, and single-run dumps.

Each experiment writes one results CSV (the contract) plus an SVG chart per
metric into the output directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .array import build_separator, half_power_beamwidth_deg, ls_beamformer
from .channel import beamform_combine, synthesize_rx, write_raw_capture
from .doa import (
    music_spectrum,
    sample_covariance,
    snapshot_matrix,
    split_subspaces,
    write_spectrum_csv,
)
from .harness import (
    METHODS,
    ExperimentSpec,
    NaPolicy,
    ResultRow,
    default_na_sweep_points,
    resolve_na,
    run_experiment,
    theory_sinr_db,
    write_results_csv,
)
from .numerology import Scenario, load_scenario
from .sensing import (
    build_rdm,
    cfar_detect,
    demod_grid,
    ls_separate,
    measure_rdm_sinr,
    target_bin,
    write_detections_csv,
    write_rdm_csv,
    write_rdm_npy,
)
from .svgplot import line_chart
from .waveform import ofdm_modulate, random_qam16_grid


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", type=Path, default=None,
                   help="scenario config file (default: built-in two-target scene)")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--methods", type=str, default="fft2d,sep,snc")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--oracle-angles", action="store_true",
                   help="use true target angles instead of per-trial MUSIC")
    p.add_argument("--pfa", type=float, default=1e-11)
    p.add_argument("--cfar-train", type=int, default=16)
    p.add_argument("--cfar-guard", type=int, default=4)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--na-policy", type=str, default="per_target_optimal",
                   choices=["per_target_ns", "per_target_ne", "per_target_optimal"])
    p.add_argument("--design-range", type=float, default=None,
                   help="fix compensation to this range's delay offset for all targets")


def _load(args) -> Scenario:
    sc = load_scenario(args.scenario) if args.scenario else Scenario()
    if args.seed is not None:
        sc = dataclasses.replace(sc, seed=args.seed)
    return sc


def _spec(args, scenario, sweep="none", values=()) -> ExperimentSpec:
    policy = (NaPolicy(kind="fixed_range", design_range_m=args.design_range)
              if args.design_range else NaPolicy(kind=args.na_policy))
    return ExperimentSpec(
        scenario=scenario,
        methods=tuple(m.strip() for m in args.methods.split(",") if m.strip()),
        trials=args.trials, sweep=sweep, sweep_values=tuple(values),
        na_policy=policy, oracle_angles=args.oracle_angles, pfa=args.pfa,
        cfar_train=args.cfar_train, cfar_guard=args.cfar_guard,
        seed=args.seed, workers=args.workers)


def _plot_rows(rows: list[ResultRow], out: Path, xlabel: str) -> None:
    by_metric = {"sinr": "sinr_rdm_db_sim", "pd": "pd"}
    targets = sorted({r.target_index for r in rows})
    for metric, attr in by_metric.items():
        series: dict[str, tuple[list[float], list[float]]] = {}
        dashed: set[str] = set()
        for method in METHODS:
            for u in targets:
                pts = [(r.sweep_value, getattr(r, attr)) for r in rows
                       if r.method == method and r.target_index == u
                       and r.sweep_value is not None]
                if pts:
                    name = f"{method} t{u}"
                    series[name] = ([p[0] for p in pts], [p[1] for p in pts])
                if metric == "sinr" and pts:
                    tpts = [(r.sweep_value, r.sinr_rdm_db_theory) for r in rows
                            if r.method == method and r.target_index == u
                            and r.sweep_value is not None]
                    tname = f"{method} t{u} theory"
                    series[tname] = ([p[0] for p in tpts], [p[1] for p in tpts])
                    dashed.add(tname)
        if series:
            ylabel = "RDM SINR (dB)" if metric == "sinr" else "detection probability"
            line_chart(out / f"{metric}.svg", series, xlabel=xlabel, ylabel=ylabel,
                       dashed=dashed, title="")


def _run_and_write(spec: ExperimentSpec, out: Path, sweep_name: str, xlabel: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    rows = run_experiment(spec)
    write_results_csv(out / "results.csv", rows, sweep=sweep_name)
    if sweep_name != "none":
        _plot_rows(rows, out, xlabel)
    for r in rows:
        print(f"{sweep_name}={r.sweep_value} {r.method} target{r.target_index}: "
              f"sinr={r.sinr_rdm_db_sim:.2f} dB (theory {r.sinr_rdm_db_theory:.2f}) "
              f"pd={r.pd:.3f}+-{r.pd_ci95:.3f} n={r.trials_used}")


def cmd_doa_spectrum(args) -> None:
    sc = _load(args)
    args.out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(sc.seed if args.seed is None else args.seed)
    num, geom = sc.numerology, sc.geometry
    grid = random_qam16_grid(num, rng, dtype=np.complex64)
    rx = synthesize_rx(ofdm_modulate(grid, num), sc, rng=rng)
    snaps = snapshot_matrix(rx, num, sc.music_snapshots)
    split = split_subspaces(sample_covariance(snaps), len(sc.targets))
    hpbw = half_power_beamwidth_deg(geom.nt, geom.dt, geom.wavelength)
    grid_deg = np.arange(sc.steer_angle_deg - hpbw, sc.steer_angle_deg + hpbw, 0.01)
    spectrum = music_spectrum(split, grid_deg, geom)
    write_spectrum_csv(args.out / "doa_spectrum.csv", spectrum)
    line_chart(args.out / "doa_spectrum.svg",
               {"pseudo-spectrum (dB)": (list(spectrum.grid_deg),
                                         list(10 * np.log10(spectrum.values)))},
               xlabel="angle (deg)", ylabel="10 log10 P(theta)")
    print(f"wrote {args.out / 'doa_spectrum.csv'}")


def cmd_sweep_na(args) -> None:
    sc = _load(args)
    points = ([int(v) for v in args.points.split(",")] if args.points
              else list(default_na_sweep_points(sc)))
    spec = _spec(args, sc, sweep="na", values=points)
    if "snc" not in spec.methods:
        raise SystemExit("sweep-na needs the snc method")
    _run_and_write(spec, args.out, "na", "compensation samples")


def cmd_sweep_power(args) -> None:
    sc = _load(args)
    powers = [float(v) for v in args.powers.split(",")]
    _run_and_write(_spec(args, sc, "power_dbm", powers), args.out,
                   "power_dbm", "transmit power (dBm)")


def cmd_sweep_range(args) -> None:
    sc = _load(args)
    ranges = [float(v) for v in args.ranges.split(",")]
    _run_and_write(_spec(args, sc, "range_m", ranges), args.out,
                   "range_m", "target range (m)")


def cmd_single_run(args) -> None:
    sc = _load(args)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    num, geom = sc.numerology, sc.geometry
    rng = np.random.default_rng(sc.seed if args.seed is None else args.seed)
    grid = random_qam16_grid(num, rng, dtype=np.complex64)
    tx = ofdm_modulate(grid, num)
    rx = synthesize_rx(tx, sc, rng=rng)
    if args.dump_raw:
        write_raw_capture(out / "capture.c64", rx)
    bins = [target_bin(num, t) for t in sc.targets]
    policy = (NaPolicy(kind="fixed_range", design_range_m=args.design_range)
              if args.design_range else NaPolicy(kind=args.na_policy))

    w_rx = ls_beamformer(sc.steer_angle_deg, geom, side="rx")
    rdm = build_rdm(demod_grid(beamform_combine(rx, w_rx), 0, num).grid, grid, num)
    write_rdm_npy(out / "rdm_fft2d.npy", rdm)
    write_rdm_csv(out / "rdm_fft2d.csv", rdm, min_power_db=-60.0)
    detections = cfar_detect(rdm, args.pfa, args.cfar_train, args.cfar_guard)
    write_detections_csv(out / "detections_fft2d.csv", detections, rdm)
    for u, t in enumerate(sc.targets):
        s = measure_rdm_sinr(rdm, *bins[u], peaks=bins)
        print(f"fft2d target{u} ({t.range_m:.0f} m): sinr={s:.2f} dB "
              f"(theory {theory_sinr_db(sc, 'fft2d', u):.2f}), "
              f"{len(detections)} map detections")

    sep = build_separator([t.angle_deg for t in sc.targets], geom)
    streams = ls_separate(rx, sep)
    for u, t in enumerate(sc.targets):
        na = resolve_na(policy, sc, t, streams[u].lambda_u)
        rdm_u = build_rdm(demod_grid(streams[u].samples, na, num).grid, grid, num)
        write_rdm_npy(out / f"rdm_snc_t{u}.npy", rdm_u)
        dets = cfar_detect(rdm_u, args.pfa, args.cfar_train, args.cfar_guard)
        write_detections_csv(out / f"detections_snc_t{u}.csv", dets, rdm_u)
        s = measure_rdm_sinr(rdm_u, *bins[u], peaks=bins)
        print(f"snc target{u} ({t.range_m:.0f} m, na={na}): sinr={s:.2f} dB "
              f"(theory {theory_sinr_db(sc, 'snc', u, na):.2f})")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ofdmsense",
        description="Monostatic MIMO-OFDM sensing experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("doa-spectrum", help="angle pseudo-spectrum of one capture")
    _add_common(p)
    p.set_defaults(func=cmd_doa_spectrum)

    p = sub.add_parser("sweep-na", help="map SINR vs compensation length")
    _add_common(p)
    p.add_argument("--points", type=str, default=None,
                   help="comma-separated compensation lengths in samples")
    p.set_defaults(func=cmd_sweep_na)

    p = sub.add_parser("sweep-power", help="map SINR and pd vs transmit power")
    _add_common(p)
    p.add_argument("--powers", type=str, default="31,34,37,40,43,46")
    p.set_defaults(func=cmd_sweep_power)

    p = sub.add_parser("sweep-range", help="map SINR and pd vs steered-target range")
    _add_common(p)
    p.add_argument("--ranges", type=str, default="400,500,650,800")
    p.set_defaults(func=cmd_sweep_range)

    p = sub.add_parser("single-run", help="one trial with RDM/detection dumps")
    _add_common(p)
    p.add_argument("--dump-raw", action="store_true",
                   help="also write the raw antenna capture")
    p.set_defaults(func=cmd_single_run)

    args = parser.parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
