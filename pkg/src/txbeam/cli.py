"""Command-line client for transmit beam patterns computed from stored impulse-response maps.

Commands run in-process by default; with ``--server URL`` they are sent to a
running ``txbeam serve`` instance, which keeps maps loaded between calls.

Exit codes: 0 success, 1 comparison above the pass threshold, 2 invalid
configuration or arguments, 3 file or network I/O, 4 incompatible stored map,
5 any other computation failure (including failed sweep cases).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .client import HttpBackend, LocalBackend
from .config import ENV_MAP_STORE, load_config
from .errors import TxBeamError
from .service import schemas as s

log = logging.getLogger("txbeam")

EXIT_OK, EXIT_FAILED, EXIT_INVALID, EXIT_IO, EXIT_INCOMPATIBLE, EXIT_COMPUTE = range(6)
_EXIT_BY_KIND = {"config": EXIT_INVALID, "invalid-argument": EXIT_INVALID, "io": EXIT_IO,
                 "incompatible": EXIT_INCOMPATIBLE}


def exit_code(exc: TxBeamError) -> int:
    return _EXIT_BY_KIND.get(exc.kind, EXIT_COMPUTE)


def _common(p: argparse.ArgumentParser, *, seed=False, threads=True, out=True):
    p.add_argument("--config", metavar="PATH", help="TOML run configuration")
    if threads:
        p.add_argument("--threads", type=int, metavar="N", help="worker threads (default: all cores)")
    if out:
        p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--map-store", metavar="DIR",
                   help=f"map store directory (also settable through ${ENV_MAP_STORE})")
    p.add_argument("--threshold-db", type=float, metavar="X",
                   help="keep pulse bins within X dB of the spectral peak (wideband)")
    if seed:
        p.add_argument("--seed", type=int, metavar="S", help="random seed")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="txbeam", description=__doc__.split("\n\n")[0])
    ap.add_argument("--server", metavar="URL", help="send commands to a running service")
    ap.add_argument("--json", action="store_true", help="print the raw JSON response")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("maps", help="compute the wideband and/or narrowband maps")
    _common(p)
    p.add_argument("--mode", choices=["both", "wideband", "narrowband"])
    p.add_argument("--f0", type=float, action="append", metavar="HZ",
                   help="narrowband frequency (repeatable, default: pulse.f0)")
    p.add_argument("--force", action="store_true", help="recompute even if a compatible map exists")

    p = sub.add_parser("bp", help="one beam pattern from stored maps")
    _common(p)
    p.add_argument("--mode", choices=["wideband", "narrowband"])
    p.add_argument("--f0", type=float, metavar="HZ")
    p.add_argument("--elements", type=int, metavar="M")
    p.add_argument("--focus", type=float, metavar="METRES")
    p.add_argument("--delays", metavar="PATH", help="delay file (one value per element or pair)")
    p.add_argument("--image", action="store_true", default=None, help="also write a dB graymap")
    p.add_argument("--text", action="store_true", default=None, help="also write a text matrix")
    p.add_argument("--name", help="output file stem")

    p = sub.add_parser("compare", help="distance and dB histogram between two grids")
    p.add_argument("bp", metavar="BP", help="beam pattern (binary or text matrix)")
    p.add_argument("--reference", metavar="PATH", required=True)
    p.add_argument("--threshold", type=float, metavar="D", help="fail (exit 1) when the distance exceeds D")
    p.add_argument("--floor-db", type=float, default=60.0)
    p.add_argument("--bin-width", type=float, default=1.0, metavar="DB")

    p = sub.add_parser("sweep", help="all (f0, M, F) combinations of the sweep lists")
    _common(p)
    p.add_argument("--mode", choices=["wideband", "narrowband"])
    p.add_argument("--reference", metavar="DIR", help="directory of reference grids named like the cases")
    p.add_argument("--image", action="store_true", default=None)

    p = sub.add_parser("pca", help="random-delay ensemble projected to k dimensions")
    _common(p, seed=True)
    p.add_argument("--count", type=int, default=30000)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--f0", type=float, action="append", metavar="HZ")
    p.add_argument("--pairs", type=int, help="number of delayed pairs (default: transmit.elements / 2)")
    p.add_argument("--no-pin-center", action="store_true", help="also delay the innermost pair")
    p.add_argument("--no-ensemble", action="store_true", help="skip writing the full ensemble matrix")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return ap


def _resolved_config(args) -> dict:
    overrides = {
        "threads": getattr(args, "threads", None),
        "seed": getattr(args, "seed", None),
        "paths.out": getattr(args, "out", None),
        "paths.map_store": getattr(args, "map_store", None),
        "pulse.threshold_db": getattr(args, "threshold_db", None),
        "transmit.mode": getattr(args, "mode", None) if args.command in ("bp", "sweep") else None,
        "pulse.f0": getattr(args, "f0", None) if args.command == "bp" else None,
        "transmit.elements": getattr(args, "elements", None),
        "transmit.focus": getattr(args, "focus", None),
    }
    if getattr(args, "delays", None):
        overrides["transmit.delays_file"] = os.path.abspath(args.delays)
    if getattr(args, "elements", None) is not None:
        # keep the stored map extent when only the active aperture changes
        base = load_config(args.config, {k: v for k, v in overrides.items() if not k.startswith("transmit.")})
        overrides["transmit.max_elements"] = max(base.transmit.stored_elements, args.elements)
    cfg = load_config(args.config, overrides)
    # paths travel to the server as absolute paths
    cfg.paths.map_store = os.path.abspath(cfg.paths.map_store)
    cfg.paths.out = os.path.abspath(cfg.paths.out)
    return cfg.model_dump(mode="json")


def _print(args, result: dict, text: str):
    if args.json:
        print(json.dumps(result, indent=2, sort_keys=True))
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _run(args, backend) -> int:
    cmd = args.command
    if cmd == "compare":
        req = s.CompareRequest(bp_path=os.path.abspath(args.bp), reference_path=os.path.abspath(args.reference),
                               floor_db=args.floor_db, bin_width=args.bin_width, threshold=args.threshold)
        res = backend.call("compare", req)
        _print(args, res, res["report"])
        return EXIT_FAILED if res["passed"] is False else EXIT_OK
    config = _resolved_config(args)
    if cmd == "maps":
        res = backend.call("maps", s.MapsRequest(config=config, mode=args.mode or "both", f0=args.f0,
                                                  force=args.force))
        lines = [f"{m['status']:>8}  {m['kind']:<10}  {m['path']}  ({m['elapsed_s']:.3f} s)" for m in res["maps"]]
        _print(args, res, "\n".join(lines))
        return EXIT_OK
    if cmd == "bp":
        res = backend.call("bp", s.BPRequest(config=config, image=args.image, text=args.text, name=args.name))
        lines = [f"{k}: {res[k]}" for k in ("mode", "f0", "elements", "focus", "delay_source", "raw_max",
                                             "peak_x", "peak_z", "elapsed_s")]
        lines += [f"file.{k}: {v}" for k, v in res["files"].items()]
        _print(args, res, "\n".join(lines))
        return EXIT_OK
    if cmd == "sweep":
        res = backend.call("sweep", s.SweepRequest(
            config=config, reference_dir=os.path.abspath(args.reference) if args.reference else None,
            image=args.image))
        text = "".join(f"# {k}\n{v}\n" for k, v in res["tables"].items())
        for c in res["cases"]:
            if c["status"] != "ok":
                text += f"failed {c['case']}: [{c['error']['kind']}] {c['error']['message']}\n"
        _print(args, res, text)
        return EXIT_COMPUTE if res["failed"] else EXIT_OK
    if cmd == "pca":
        res = backend.call("pca", s.PCARequest(
            config=config, count=args.count, k=args.k, f0=args.f0, num_pairs=args.pairs,
            pin_center=not args.no_pin_center, save_ensemble=not args.no_ensemble))
        lines = []
        for r in res["results"]:
            ev = " ".join(f"{v:.6e}" for v in r["eigenvalues"])
            lines.append(f"f0 {r['f0']:g} Hz: eigenvalues {ev}; table {r['files']['table']}")
        _print(args, res, "\n".join(lines))
        return EXIT_OK
    raise AssertionError(cmd)


def main(argv=None, backend=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("txbeam").setLevel(logging.DEBUG if args.verbose > 1 else
                                         logging.INFO if args.verbose else logging.WARNING)
    if args.command == "serve":
        import uvicorn

        uvicorn.run("txbeam.service.app:app", host=args.host, port=args.port)
        return EXIT_OK
    if backend is None:
        backend = HttpBackend(args.server) if args.server else LocalBackend()
    try:
        return _run(args, backend)
    except TxBeamError as exc:
        print(f"txbeam: error [{exc.kind}]: {exc}", file=sys.stderr)
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
