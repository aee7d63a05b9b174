"""``bridgelab`` command-line entry point.

Exit codes: 0 success, 1 a verification check failed, 2 usage or
configuration error, 3 I/O error, 4 numeric error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, derive_seed
from .errors import ConfigurationError, DomainError, NumericError
from .kernel import kernel_params
from .oracle import GaussianWorld, mmse_denoiser, train_affine
from .process import alpha_of, g_of
from .sampler import SampleRun, dump_trajectory_csv, sb_ode_sample
from .signal import Waveform, compress, decompress, istft, read_wav, si_sdr, stft, write_wav
from .suites import SUITES, run_suite

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3, 4
DENOISERS = ("oracle-x0", "affine-file", "zero")


class InputError(Exception):
    """Unreadable or malformed input file (exit code 3)."""


def _parse_floats(text: str) -> list:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigurationError(f"bad number list {text!r}: {exc}") from None


def load_config(args) -> RunConfig:
    if args.config is None:
        cfg = RunConfig()
    else:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise InputError(f"cannot read config: {exc}") from None
        cfg = RunConfig.from_text(text)
    for item in args.set or []:
        name, sep, value = item.partition("=")
        section, dot, key = name.strip().partition(".")
        if not sep or not dot:
            raise ConfigurationError(f"--set expects section.key=value, got {item!r}")
        cfg.set(section, key, value)
    if args.seed is not None:
        cfg.set("run", "seed", args.seed)
    if args.out is not None:
        cfg.set("run", "output_dir", str(args.out))
    cfg.validate()
    return cfg


def _jsonable(d: dict) -> dict:
    """Non-finite floats as the strings ``"inf"``, ``"-inf"``, ``"nan"``."""
    return {k: str(v) if isinstance(v, float) and not math.isfinite(v) else v for k, v in d.items()}


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg["run"]["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "effective_config.ini").write_text(cfg.to_text())
    return out


def cmd_kernel_table(cfg: RunConfig, times) -> Path:
    spec = cfg.process_spec()
    path = _out_dir(cfg) / "kernel_table.csv"
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "w_x", "w_y", "var", "g", "alpha"])
        for t in times:
            kp = kernel_params(spec, t)
            row = (t, kp.w_x, kp.w_y, kp.var, g_of(spec, t), alpha_of(spec, t))
            wr.writerow([repr(float(v)) for v in row])
    return path


def cmd_verify(cfg: RunConfig, suite: str):
    report = run_suite(cfg, suite)
    path = _out_dir(cfg) / f"report_{suite}.json"
    path.write_text(report.to_json())
    return report, path


def synthetic_pair(cfg: RunConfig):
    """Clean tone mix plus white Gaussian noise at ``sample.snr_db``."""
    s = cfg["sample"]
    rng = np.random.default_rng(derive_seed(cfg.seed, "sample"))
    sr = s["sample_rate"]
    n = int(round(s["duration"] * sr))
    if n < 1:
        raise ConfigurationError("sample.duration gives an empty signal")
    t = np.arange(n) / sr
    freqs = rng.uniform(150.0, 2500.0, size=4)
    amps = rng.uniform(0.2, 1.0, size=4)
    phases = rng.uniform(0.0, 2 * np.pi, size=4)
    clean = 0.1 * np.sum(amps[:, None] * np.sin(2 * np.pi * freqs[:, None] * t + phases[:, None]), axis=0)
    noise = rng.standard_normal(n)
    noise *= math.sqrt(np.mean(clean**2) / np.mean(noise**2) / 10 ** (s["snr_db"] / 10))
    return Waveform(clean, sr), Waveform(clean + noise, sr)


def _read(path) -> Waveform:
    try:
        return read_wav(path)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read WAV {path}: {exc}") from None


def load_affine_file(path, n_bins: int):
    """Affine coefficients ``a``, ``b_x``, ``b0``: scalars or one value per bin.

    Complex ``b0`` is given as ``{"re": [...], "im": [...]}``.
    """
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read affine file {path}: {exc}") from None

    def coeff(key):
        v = raw.get(key, 0.0)
        if isinstance(v, dict):
            v = np.asarray(v.get("re", 0.0), dtype=float) + 1j * np.asarray(v.get("im", 0.0), dtype=float)
        v = np.asarray(v)
        if v.size == 1:
            return v.reshape(()).item()
        if v.shape != (n_bins,):
            raise ConfigurationError(f"{path}: {key} needs 1 or {n_bins} values, got {v.size}")
        return v

    a, b_x, b0 = coeff("a"), coeff("b_x"), coeff("b0")
    return lambda x, y, t: a * x + b_x * y + b0


def cmd_sample(cfg: RunConfig, denoiser: str, input_path=None, clean_path=None) -> dict:
    """Enhance one utterance with the bridge ODE sampler in the compressed STFT domain."""
    s, st = cfg["sample"], cfg["stft"]
    if input_path is not None:
        noisy = _read(input_path)
        clean = _read(clean_path) if clean_path is not None else None
        if clean is not None and len(clean) != len(noisy):
            raise InputError("clean and noisy WAV lengths differ")
    elif s["source"] == "gaussian":
        clean, noisy = synthetic_pair(cfg)
    else:
        raise ConfigurationError("sample.source = wav needs --input")
    stft_cfg = cfg.stft()
    beta, scale = st["beta"], st["scale"]
    y = compress(stft(noisy, stft_cfg), beta, scale)
    if denoiser == "oracle-x0":
        if clean is None:
            raise ConfigurationError("the oracle-x0 denoiser needs the clean signal (--clean)")
        x0 = compress(stft(clean, stft_cfg), beta, scale).data
        fn = lambda x, yy, t: x0  # noqa: E731
    elif denoiser == "zero":
        fn = lambda x, yy, t: np.zeros_like(x)  # noqa: E731
    elif denoiser == "affine-file":
        if not s["affine_file"]:
            raise ConfigurationError("the affine-file denoiser needs sample.affine_file")
        fn = load_affine_file(s["affine_file"], stft_cfg.n_bins)
    else:
        raise ConfigurationError(f"unknown denoiser {denoiser!r}; choose from {DENOISERS}")

    spec = cfg.process_spec("sbve")
    run = sb_ode_sample(spec, fn, y.data, cfg.grid(), record=s["record"])
    enhanced = Waveform(istft(decompress(y.with_data(run.final), beta, scale)).samples, noisy.sample_rate)
    out = _out_dir(cfg)
    try:
        write_wav(out / "enhanced.wav", enhanced)
        write_wav(out / "noisy.wav", noisy)
        if clean is not None:
            write_wav(out / "clean.wav", clean)
        if s["record"]:
            k = max(0, s["trajectory_dims"])
            sub = [np.asarray(x).ravel()[:k] for x in run.trajectory]
            dump_trajectory_csv(out / "trajectory.csv", SampleRun(run.grid, sub[0], sub, run.times))
    except OSError as exc:
        raise InputError(f"cannot write outputs: {exc}") from None
    metrics = {"denoiser": denoiser, "n_steps": cfg.grid().n_steps, "frames": int(y.data.shape[0])}
    if clean is not None:
        before, after = si_sdr(clean, noisy), si_sdr(clean, enhanced)
        metrics.update(si_sdr_in=before, si_sdr_out=after, si_sdr_improvement=after - before)
    (out / "metrics.json").write_text(json.dumps(_jsonable(metrics), indent=2))
    return metrics


def cmd_train_toy(cfg: RunConfig, loss_kind: str) -> dict:
    tr = cfg["train"]
    spec = cfg.process_spec()
    world = GaussianWorld(tr["m0"], tr["s0sq"], tr["y"])
    result = train_affine(
        world, spec, loss_kind, steps=tr["steps"], lr=tr["lr"], seed=derive_seed(cfg.seed, "train"),
        t=tr["t"], weights=cfg.loss_weights(), t_min=tr["t_min"],
    )
    summary = {"loss_kind": loss_kind, "t": tr["t"], "steps": tr["steps"], "coefficients": result.denoiser.to_dict()}
    if tr["t"] is not None:
        ref = mmse_denoiser(world, spec, tr["t"], "x0" if loss_kind == "sb" else "mu")
        summary["mmse"] = ref.to_dict()
        # with y fixed only a and the offset b_x y + b0 are identifiable
        got = np.concatenate(([result.denoiser.a], result.denoiser.offset(world.y)))
        want = np.concatenate(([ref.a], ref.offset(world.y)))
        summary["max_abs_error"] = float(np.max(np.abs(got - want)))
    out = _out_dir(cfg)
    (out / "affine.json").write_text(json.dumps(summary, indent=2))
    with open(out / "loss_trace.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["step", "loss_total", "loss_l2", "loss_l1"])
        for step, loss in enumerate(result.trace):
            # the scalar world has no waveform, so the L1 term is zero
            wr.writerow([step, repr(float(loss)), repr(float(loss)), "0.0"])
    return summary


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bridgelab", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI config file (defaults apply when omitted)")
    common.add_argument("--out", type=Path, help="output directory (overrides run.output_dir)")
    common.add_argument("--seed", type=int, help="master seed (overrides run.seed)")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override one config value")
    sub = p.add_subparsers(dest="command", required=True)

    kt = sub.add_parser("kernel-table", parents=[common], help="tabulate kernel weights and variances")
    kt.add_argument("--t", help="comma-separated times (default verify.table_t); empty for header only")

    v = sub.add_parser("verify", parents=[common], help="run a verification suite")
    v.add_argument("--suite", default="all", choices=sorted(SUITES) + ["all"])

    s = sub.add_parser("sample", parents=[common], help="enhance a WAV or synthetic pair with the ODE sampler")
    s.add_argument("--denoiser", choices=DENOISERS, help="overrides sample.denoiser")
    s.add_argument("--input", type=Path, help="noisy WAV (default: synthetic pair)")
    s.add_argument("--clean", type=Path, help="clean reference WAV for metrics and the oracle denoiser")

    tt = sub.add_parser("train-toy", parents=[common], help="train the affine denoiser in the Gaussian world")
    tt.add_argument("--loss", choices=("denoise", "score", "sb"), help="overrides train.loss_kind")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command == "kernel-table":
            times = cfg["verify"]["table_t"] if args.t is None else _parse_floats(args.t)
            print(cmd_kernel_table(cfg, times))
        elif args.command == "verify":
            report, path = cmd_verify(cfg, args.suite)
            for line in report.summary_lines():
                print(line)
            print(f"{'PASS' if report.passed else 'FAIL'} suite={args.suite} ({report.wall_time:.1f} s) -> {path}")
            return EXIT_OK if report.passed else EXIT_CHECK
        elif args.command == "sample":
            if args.denoiser is not None:
                cfg.set("sample", "denoiser", args.denoiser)
            print(json.dumps(_jsonable(cmd_sample(cfg, cfg["sample"]["denoiser"], args.input, args.clean))))
        elif args.command == "train-toy":
            kind = args.loss or cfg["train"]["loss_kind"]
            print(json.dumps(cmd_train_toy(cfg, kind)))
    except (ConfigurationError, DomainError) as exc:
        print(f"bridgelab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, OSError) as exc:
        print(f"bridgelab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericError as exc:
        print(f"bridgelab: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
