"""Command line access to ingestion, guidance, metrics, and estimation.

Thin shell over the library modules: no numeric logic lives here. Exit
codes: 0 success, 2 usage or validation failure, 3 numeric or estimation
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import DataError, EstimationError, GeometryError, SbssError
from .core import run_sbss
from .guidance import GuidanceParams, compute_guidance, setting_metrics
from .model import setting_from_json
from .workspace import Workspace, export_result, fmt, ingest_csv

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ESTIMATION = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sbsskit",
        description="Workbench for spatial blind source separation parameters",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="create a workspace from a CSV point table")
    p_ingest.add_argument("csv", type=Path)
    p_ingest.add_argument("--x", required=True, dest="x_column", help="x / longitude column")
    p_ingest.add_argument("--y", required=True, dest="y_column", help="y / latitude column")
    p_ingest.add_argument("--lonlat", action="store_true", help="project lon/lat input")
    p_ingest.add_argument("--workspace", required=True, type=Path)
    p_ingest.add_argument("--force", action="store_true", help="overwrite existing workspace")

    p_suggest = sub.add_parser("suggest", help="precompute guidance into guidance.json")
    p_suggest.add_argument("--workspace", required=True, type=Path)
    p_suggest.add_argument("--grid-max", type=int, default=6)
    p_suggest.add_argument("--k-min", type=int, default=2)
    p_suggest.add_argument("--k-max", type=int, default=8)
    p_suggest.add_argument("--kernel-depth", type=int, default=2)
    p_suggest.add_argument("--max-radius", type=float, default=None)
    p_suggest.add_argument("--threshold", type=float, default=0.05)

    p_metrics = sub.add_parser("metrics", help="metric table for a parameter setting")
    p_metrics.add_argument("--workspace", required=True, type=Path)
    p_metrics.add_argument("--setting", required=True, type=Path)
    p_metrics.add_argument("--json", action="store_true", dest="as_json")
    p_metrics.add_argument("--threshold", type=float, default=0.05)
    p_metrics.add_argument(
        "--experimental",
        action="store_true",
        help="include eigenvalue-difference metrics",
    )

    p_run = sub.add_parser("run", help="run the estimator and export results")
    p_run.add_argument("--workspace", required=True, type=Path)
    p_run.add_argument("--setting", required=True, type=Path)
    p_run.add_argument("--out", required=True, type=Path)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--root", type=Path, default=None, help="workspace root directory")
    p_serve.add_argument("--bind", default=None, help="host:port (default 127.0.0.1:8000)")

    return parser


def cmd_ingest(args) -> int:
    dataset = ingest_csv(
        args.csv,
        args.x_column,
        args.y_column,
        "lonlat" if args.lonlat else "planar",
    )
    Workspace.create(args.workspace, dataset, force=args.force)
    print(f"workspace created at {args.workspace} (n={dataset.n}, p={dataset.p})")
    return EXIT_OK


def cmd_suggest(args) -> int:
    ws = Workspace.open(args.workspace)
    if args.k_max < args.k_min:
        raise DataError("k range invalid", field="k_max")
    params = GuidanceParams(
        grid_max=args.grid_max,
        k_min=args.k_min,
        k_max=args.k_max,
        kernel_depth=args.kernel_depth,
        max_radius=args.max_radius,
        threshold=args.threshold,
    )
    params.validate(ws.dataset.n)
    bundle = compute_guidance(ws.dataset, params)
    ws.store_guidance(params.to_json(), bundle.to_json())
    print(f"guidance written to {args.workspace / 'guidance.json'}")
    return EXIT_OK


def _load_setting_file(path: Path):
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}", code="unreadable_file") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}", code="invalid_setting") from exc
    return setting_from_json(doc)


def cmd_metrics(args) -> int:
    ws = Workspace.open(args.workspace)
    setting = _load_setting_file(args.setting)
    ws.validate_setting(setting)
    report = setting_metrics(
        ws.dataset,
        setting,
        threshold=args.threshold,
        include_experimental=args.experimental,
    )
    if args.as_json:
        print(json.dumps(report, indent=2))
        return EXIT_OK
    print(f"{'region':<14} {'count':>7} {'flag':>5} {'cov_diff':>14}")
    for row in report["regions"]:
        cov = "-" if row["cov_diff"] is None else fmt(row["cov_diff"])
        flag = "LOW" if row["flagged"] else ""
        print(f"{row['id']:<14} {row['count']:>7} {flag:>5} {cov:>14}")
    for ring_idx, means in enumerate(report["kernel"]["per_ring_means"]):
        flags = report["kernel"]["per_ring_flagged"][ring_idx]
        cells = ", ".join(
            f"{report['regions'][i]['id']}={m:.2f}{' LOW' if f else ''}"
            for i, (m, f) in enumerate(zip(means, flags))
        )
        print(f"ring {ring_idx}: {cells}")
    return EXIT_OK


def cmd_run(args) -> int:
    ws = Workspace.open(args.workspace)
    setting = _load_setting_file(args.setting)
    ws.validate_setting(setting)
    result = run_sbss(ws.dataset, setting)
    paths = export_result(result, args.out, ws.dataset)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    bind = args.bind or "127.0.0.1:8000"
    host, _, port = bind.partition(":")
    app = create_app(workspace_root=args.root)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000))
    return EXIT_OK


_COMMANDS = {
    "ingest": cmd_ingest,
    "suggest": cmd_suggest,
    "metrics": cmd_metrics,
    "run": cmd_run,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except EstimationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except (DataError, GeometryError) as exc:
        pointer = f" (at {exc.field})" if exc.field else ""
        print(f"error: {exc}{pointer}", file=sys.stderr)
        return EXIT_USAGE
    except SbssError as exc:  # pragma: no cover - defensive
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
