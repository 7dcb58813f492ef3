"""``aberrasim`` command-line interface.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NumericalError, ValidationError
from .imaging import (GridCache, MTFCurve, NoiseModel, generate_dataset, mtf50, mtf_from_psf,
                      parse_distances, psnr, read_image, simulate, slanted_edge_mtf, ssim,
                      write_mtf_csv, write_png16)
from .imaging.simulate import check_distance
from .optics import bundled_prescription, load_prescription, trace_rays
from .optics.paraxial import first_order
from .psf import object_point, psf_grid, write_mosaic_png, write_psfg
from .psf.io import psfg_bytes
from .psf.pupil import DEFAULT_PUPIL_N, reference_wavelength

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
DEFAULT_INN_TOL = 1e-5

log = logging.getLogger("aberrasim")


def output_schema(command: str) -> dict:
    """JSON schema for the ``--json`` output of ``command``."""
    name = command.replace("-", "_") + ".schema.json"
    text = resources.files("aberrasim").joinpath("data", "schemas", "cli", name).read_text()
    return json.loads(text)


def _prescription(args):
    return load_prescription(args.prescription) if args.prescription else bundled_prescription()


def _psf_options(args) -> dict:
    return {"pupil_n": args.pupil_n, "threads": args.threads, "grid": args.grid,
            "kernel_size": args.kernel_size}


def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(text)


def _noise(args):
    if args.no_noise:
        return None
    return NoiseModel(args.noise_a, args.noise_b, args.seed)


def cmd_trace(args) -> int:
    p = _prescription(args)
    d = check_distance(args.distance)
    lam = args.wavelength or reference_wavelength(p)
    fo = first_order(p, lam)
    if args.fan < 1:
        raise ValidationError("--fan must be at least 1")
    obj = object_point(p, (0.0, args.field), d)
    fractions = np.linspace(-1.0, 1.0, args.fan) if args.fan > 1 else np.zeros(1)
    targets = np.zeros((args.fan, 3))
    targets[:, 1] = fractions * fo.entrance_pupil_radius * args.fan_scale
    targets[:, 2] = fo.entrance_pupil_z
    dirs = targets - obj
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    bt = trace_rays(p, np.broadcast_to(obj, dirs.shape), dirs, lam, record=True)
    refracting = [i for i, s in enumerate(p.surfaces) if s.refracts]
    rays = []
    for r in range(args.fan):
        ok = bool(bt.failure[r] == 0)
        hits = [{"surface": i, "point": bt.hits[r, i].tolist()}
                for i in refracting if np.all(np.isfinite(bt.hits[r, i]))]
        clip = int(bt.clip_surface[r])
        rays.append({"pupil_fraction": float(fractions[r]), "hits": hits,
                     "image_point": bt.position[r].tolist() if ok else None,
                     "opl": float(bt.opl[r]), "vignetted": not ok,
                     "clip_surface": clip if clip >= 0 else None})
    payload = {"command": "trace", "wavelength_nm": float(lam), "distance_mm": d,
               "field_mm": args.field, "object_point": obj.tolist(), "rays": rays}
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text)
    print(json.dumps(payload, sort_keys=True) if args.json else text)
    return EXIT_OK


def _image_shape(spec: str):
    try:
        h, w = (int(v) for v in spec.lower().split("x"))
    except ValueError:
        raise ValidationError(f"bad --size {spec!r}; expected HxW") from None
    if h < 1 or w < 1:
        raise ValidationError("--size must be positive")
    return h, w


def cmd_psf(args) -> int:
    p = _prescription(args)
    d = check_distance(args.distance)
    shape = _image_shape(args.size)
    grid = psf_grid(p, d, shape, **_psf_options(args))
    write_psfg(grid, args.out)
    if args.dump_png:
        write_mosaic_png(grid, args.dump_png)
    payload = {"command": "psf", "out": str(args.out), "distance_mm": d,
               "rows": grid.shape[0], "cols": grid.shape[1], "channels": list(grid.channels),
               "kernel_size": grid.kernel_size,
               "sha256": hashlib.sha256(psfg_bytes(grid)).hexdigest(),
               "failed_fields": int(grid.meta.get("failed_fields", 0))}
    _emit(args, payload, f"wrote {args.out} ({grid.shape[0]}x{grid.shape[1]} kernels)")
    return EXIT_OK


def cmd_simulate(args) -> int:
    p = _prescription(args)
    d = check_distance(args.distance)
    img = read_image(args.input)
    out = simulate(img, p, d, noise=_noise(args), **_psf_options(args))
    write_png16(args.out, out)
    payload = {"command": "simulate", "input": str(args.input), "out": str(args.out),
               "distance_mm": d, "seed": args.seed, "psnr": psnr(img, out)}
    _emit(args, payload, f"wrote {args.out}")
    return EXIT_OK


def cmd_dataset(args) -> int:
    p = _prescription(args)
    distances = parse_distances(args.distances) if args.distances else None
    noise = None if args.no_noise else (args.noise_a, args.noise_b)
    cache = GridCache(p, cache_dir=args.cache_dir, **_psf_options(args))
    manifest = generate_dataset(args.sharp_dir, distances, args.out, p, seed=args.seed,
                                noise=noise, cache=cache)
    payload = {"command": "dataset", "manifest": str(Path(args.out) / "manifest.json"),
               "entries": len(manifest.entries), "errors": len(manifest.errors)}
    _emit(args, payload, f"wrote {payload['entries']} entries to {payload['manifest']}")
    return EXIT_OK


def _load_kernel(path) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".npy":
        k = np.load(path)
    elif path.suffix in (".csv", ".txt"):
        k = np.loadtxt(path, delimiter="," if path.suffix == ".csv" else None)
    else:
        k = read_image(path)
        if k.ndim == 3:
            k = k.mean(axis=2)
    if k.ndim != 2:
        raise ValidationError("kernel must be a 2-D array")
    return k


def gaussian_kernel(sigma: float, size: int | None = None) -> np.ndarray:
    if not sigma > 0:
        raise ValidationError("--gaussian sigma must be positive")
    size = size or 2 * int(np.ceil(5 * sigma)) + 1
    x = np.arange(size) - size // 2
    g = np.exp(-(x[:, None] ** 2 + x[None, :] ** 2) / (2 * sigma ** 2))
    return g / g.sum()


def cmd_mtf(args) -> int:
    sources = [args.kernel is not None, args.edge is not None, args.gaussian is not None]
    if sum(sources) != 1:
        raise ValidationError("give exactly one of --kernel, --edge or --gaussian")
    if args.edge is not None:
        img = read_image(args.edge)
        curve: MTFCurve = slanted_edge_mtf(img.mean(axis=2) if img.ndim == 3 else img)
        source = "edge"
    else:
        k = gaussian_kernel(args.gaussian) if args.gaussian is not None else _load_kernel(args.kernel)
        curve = mtf_from_psf(k)
        source = "kernel"
    if args.out:
        write_mtf_csv(curve, args.out)
    m = mtf50(curve)
    payload = {"command": "mtf", "source": source, "mtf50": m.frequency, "found": m.found,
               "out": str(args.out) if args.out else None}
    suffix = "" if m.found else " (modulation stays above 0.5 up to Nyquist)"
    _emit(args, payload, f"MTF50 {m.frequency:.4f} cycles/pixel{suffix}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    a, b = read_image(args.reference), read_image(args.test)
    if a.shape != b.shape:
        raise ValidationError(f"image shapes differ: {a.shape} vs {b.shape}")
    payload = {"command": "metrics", "psnr": psnr(a, b), "ssim": ssim(a, b)}
    _emit(args, payload, f"PSNR {payload['psnr']:.4f} dB  SSIM {payload['ssim']:.6f}")
    return EXIT_OK


def cmd_inn_roundtrip(args) -> int:
    from .inn import ConditionalINN, read_weights, write_weights

    if args.weights:
        model = read_weights(args.weights)
    else:
        if args.k < 0:
            raise ValidationError("--k must be non-negative")
        model = ConditionalINN.random(args.channels, args.k, seed=args.seed)
    if args.save_weights:
        write_weights(model, args.save_weights)
    d = check_distance(args.distance)
    rng = np.random.default_rng(args.seed)
    h = w = args.image_size
    x = rng.random((model.channels, h, w)).astype(np.float32)
    y = model.chain_forward(x, d)
    back = model.chain_inverse(y, d)
    err = float(np.max(np.abs(back.astype(np.float64) - x)))
    if not np.isfinite(err):
        raise NumericalError("round trip produced non-finite values")
    tol = max(model.k, 1) * DEFAULT_INN_TOL
    payload = {"command": "inn-roundtrip", "k": model.k, "seed": args.seed,
               "shape": [model.channels, h, w], "distance_mm": d,
               "max_abs_error": err, "tolerance": tol, "passed": err < tol}
    _emit(args, payload, f"k={model.k} max round-trip error {err:.3e} (tolerance {tol:.1e})")
    return EXIT_OK if err < tol else EXIT_NUMERIC


def _common() -> argparse.ArgumentParser:
    c = argparse.ArgumentParser(add_help=False)
    c.add_argument("--prescription", type=Path, help="lens prescription JSON (default: bundled double-Gauss)")
    c.add_argument("--seed", type=int, default=0, help="master seed (unsigned 64-bit)")
    c.add_argument("--threads", type=int, default=1)
    c.add_argument("--pupil-n", type=int, default=DEFAULT_PUPIL_N, help="pupil samples per side")
    c.add_argument("--grid", type=int, default=32, help="PSF patches per side")
    c.add_argument("--kernel-size", type=int, default=25, help="odd kernel width in pixels")
    c.add_argument("--out", type=Path)
    fmt = c.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="machine-readable JSON on stdout")
    fmt.add_argument("--text", dest="json", action="store_false", help="human-readable output (default)")
    c.add_argument("-v", "--verbose", action="store_true")
    return c


def _noise_args(sp) -> None:
    sp.add_argument("--noise-a", type=float, default=1e-3)
    sp.add_argument("--noise-b", type=float, default=1e-4)
    sp.add_argument("--no-noise", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="aberrasim", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("trace", parents=[common], help="dump ray paths for a meridional fan")
    sp.add_argument("--distance", type=float, default=0.0)
    sp.add_argument("--field", type=float, default=0.0, help="object height (mm)")
    sp.add_argument("--fan", type=int, default=1, help="number of rays across the pupil")
    sp.add_argument("--fan-scale", type=float, default=1.0, help="fan extent in entrance-pupil radii")
    sp.add_argument("--wavelength", type=float, help="nm (default: reference wavelength)")
    sp.set_defaults(func=cmd_trace)

    sp = sub.add_parser("psf", parents=[common], help="compute a PSF grid (PSFG file)")
    sp.add_argument("--distance", type=float, required=True)
    sp.add_argument("--size", default="512x512", help="image size HxW in pixels")
    sp.add_argument("--dump-png", type=Path, help="also write a log-scaled kernel mosaic")
    sp.set_defaults(func=cmd_psf)

    sp = sub.add_parser("simulate", parents=[common], help="degrade one image")
    sp.add_argument("input", type=Path)
    sp.add_argument("--distance", type=float, required=True)
    _noise_args(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("dataset", parents=[common], help="generate a paired dataset")
    sp.add_argument("sharp_dir", type=Path)
    sp.add_argument("--distances", help="'a,b,c' or 'start:step:stop' (default -125:2.5:125)")
    sp.add_argument("--cache-dir", type=Path, help="PSF grid cache (default $ABERRASIM_CACHE_DIR)")
    _noise_args(sp)
    sp.set_defaults(func=cmd_dataset)

    sp = sub.add_parser("mtf", parents=[common], help="MTF curve and MTF50")
    sp.add_argument("--kernel", type=Path, help="PSF kernel (.npy, .csv or image)")
    sp.add_argument("--edge", type=Path, help="slanted-edge image")
    sp.add_argument("--gaussian", type=float, help="synthetic Gaussian kernel of this sigma (px)")
    sp.set_defaults(func=cmd_mtf)

    sp = sub.add_parser("metrics", parents=[common], help="PSNR and SSIM of two images")
    sp.add_argument("reference", type=Path)
    sp.add_argument("test", type=Path)
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("inn-roundtrip", parents=[common], help="check block-chain invertibility")
    sp.add_argument("--k", type=int, default=12)
    sp.add_argument("--channels", type=int, default=3)
    sp.add_argument("--image-size", type=int, default=32)
    sp.add_argument("--distance", type=float, default=0.0)
    sp.add_argument("--weights", type=Path, help="read a CINN weight file instead of seeding")
    sp.add_argument("--save-weights", type=Path)
    sp.set_defaults(func=cmd_inn_roundtrip)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_VALIDATION
    if args.out is None and args.command in ("psf", "simulate", "dataset"):
        print(f"error: {args.command} requires --out", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
