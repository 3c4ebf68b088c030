"""Command-line front end.

::

    rtomo simulate --spec scene.json --out data.rtomo
    rtomo image --data data.rtomo --algo {bp,jsc,cadmm} --out-dir out/ [options]
    rtomo compare --a jsc/image.f64 --b cadmm/image.f64 --truth scene.json

Exit status is 0 on success, 2 when an iterative solver stopped without
meeting its tolerance (all outputs are still written) and 1 on error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import cadmm, jsc
from .dataset import FormatError, read_dataset_with_grid, read_image, write_dataset, write_image
from .display import DEFAULT_FLOOR_DB, encode_pgm, image_metrics
from .geometry import SceneGrid
from .operator import ClusterOperator
from .scene import SceneSpecError, load_scene, parse_grid_string
from .simulate import simulate
from .solvers import CgConfig, FistaConfig

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2
ALGORITHMS = {"bp": "backprojection", "backprojection": "backprojection",
              "jsc": "jsc", "cadmm": "cadmm"}


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors share exit status 1 with other errors; 2 means "not converged"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


@dataclass
class RunManifest:
    data: str
    algorithm: str
    out_dir: str
    grid: SceneGrid | None = None
    mu: float = 100.0
    beta: float = 50.0
    eps: float = 0.01
    t_max: int = 100
    cg: CgConfig = field(default_factory=lambda: cadmm.CadmmConfig().cg)
    fista: FistaConfig = field(default_factory=FistaConfig)
    g_fista: FistaConfig = field(default_factory=lambda: cadmm.CadmmConfig().fista)
    floor_db: float = DEFAULT_FLOOR_DB
    threads: int = 1

    def __post_init__(self):
        if not self.data or not self.out_dir:
            raise CliError("dataset path and output directory must be non-empty")
        if self.algorithm not in ALGORITHMS:
            raise CliError(f"unknown algorithm {self.algorithm!r}")
        self.algorithm = ALGORITHMS[self.algorithm]
        if not self.floor_db < 0:
            raise CliError(f"display floor must be negative, got {self.floor_db}")
        if self.threads < 1:
            raise CliError("--threads must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid"] = self.grid.to_dict() if self.grid is not None else None
        return d


def cmd_simulate(spec_path, out_path, threads: int = 1, stream=None) -> int:
    stream = stream or sys.stdout
    scene = load_scene(spec_path)
    sets = simulate(scene.spec, threads=threads)
    write_dataset(out_path, sets, scene.grid)
    for i, s in enumerate(sets):
        g = s.geometry
        print(f"cluster {i}: elevation {np.degrees(g.elevation):.2f} deg, "
              f"{g.n_azimuths} azimuths x {g.waveform.K} freqs = {g.n_samples} samples",
              file=stream)
    print(f"wrote {len(sets)} clusters to {out_path}", file=stream)
    return EXIT_OK


def _resolve_grid(manifest: RunManifest, embedded: SceneGrid | None) -> SceneGrid:
    if manifest.grid is None and embedded is None:
        raise CliError("dataset carries no grid; pass --grid")
    if manifest.grid is not None and embedded is not None and manifest.grid != embedded:
        raise CliError(f"dataset/grid mismatch: dataset grid {embedded.to_dict()} "
                       f"!= requested {manifest.grid.to_dict()}")
    return manifest.grid or embedded


def _jsc_log(result: jsc.JscResult) -> str:
    lines = ["# cluster, fista_iters, objective, lipschitz, converged"]
    for i, rep in enumerate(result.reports):
        lines.append(f"{i}, {rep.iterations}, {rep.objective[-1]!r}, {rep.lipschitz!r}, "
                     f"{'yes' if rep.converged else 'no'}")
    lines.append(f"# converged: {'yes' if result.converged else 'no'}")
    return "\n".join(lines) + "\n"


def form_image(manifest: RunManifest, sets, grid: SceneGrid):
    """Run the selected algorithm; returns ``(magnitude image, log text, converged)``."""
    ops = [ClusterOperator(s.geometry, grid) for s in sets]
    if manifest.algorithm == "backprojection":
        image = np.zeros(grid.size)
        for op, s in zip(ops, sets):
            image += np.abs(op.adjoint(s.samples))
        return image, "# backprojection: sum over clusters of |A^H y|\n", True
    if manifest.algorithm == "jsc":
        res = jsc.run_jsc(ops, sets, jsc.JscConfig(manifest.mu, manifest.fista), manifest.threads)
        return res.image, _jsc_log(res), res.converged
    cfg = cadmm.CadmmConfig(manifest.mu, manifest.beta, manifest.eps, manifest.t_max,
                            manifest.cg, manifest.g_fista)
    res = cadmm.run(ops, sets, cfg, threads=manifest.threads)
    return res.image, res.report.to_log(), res.report.converged


def cmd_image(manifest: RunManifest, stream=None) -> int:
    stream = stream or sys.stdout
    sets, embedded = read_dataset_with_grid(manifest.data)
    grid = _resolve_grid(manifest, embedded)
    manifest = replace(manifest, grid=grid)
    image, log, converged = form_image(manifest, sets, grid)
    os.makedirs(manifest.out_dir, exist_ok=True)
    write_image(os.path.join(manifest.out_dir, "image.f64"), grid, image)
    with open(os.path.join(manifest.out_dir, "image.pgm"), "wb") as fh:
        fh.write(encode_pgm(grid, image, manifest.floor_db))
    with open(os.path.join(manifest.out_dir, "solver.log"), "w") as fh:
        fh.write(log)
    with open(os.path.join(manifest.out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if manifest.algorithm == "cadmm":
        n = len([ln for ln in log.splitlines() if ln and not ln.startswith("#")])
        state = f"converged at iteration {n}" if converged else f"not converged after {n} iterations"
        print(f"cadmm {state}", file=stream)
    elif not converged:
        print(f"{manifest.algorithm}: some local solves hit their iteration cap", file=stream)
    print(f"wrote {manifest.out_dir}", file=stream)
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def cmd_compare(a_path, b_path, truth_path, radius: float = 0.3) -> dict:
    grid_a, img_a = read_image(a_path)
    grid_b, img_b = read_image(b_path)
    if grid_a != grid_b:
        raise CliError("images are on different grids")
    truth = load_scene(truth_path).ground_truth
    if not truth:
        raise CliError("truth scene has no ground-plane (z = 0) scatterers")
    ma = image_metrics(grid_a, img_a, truth, radius)
    mb = image_metrics(grid_b, img_b, truth, radius)
    return {
        "radius_m": radius,
        "truth_xy_m": [list(t) for t in truth],
        "a": dict(path=os.fspath(a_path), **ma),
        "b": dict(path=os.fspath(b_path), **mb),
        "b_minus_a_artifact_db": mb["artifact_to_signal_db"] - ma["artifact_to_signal_db"],
    }


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rtomo", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="synthesize an RTOMO1 dataset from a JSON scene")
    s.add_argument("--spec", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--threads", type=int, default=1)

    i = sub.add_parser("image", help="form an image from a dataset")
    i.add_argument("--data", required=True)
    i.add_argument("--algo", required=True, choices=["bp", "jsc", "cadmm"])
    i.add_argument("--mu", type=float, default=100.0)
    i.add_argument("--beta", type=float, default=50.0)
    i.add_argument("--eps", type=float, default=0.01)
    i.add_argument("--tmax", type=int, default=100)
    i.add_argument("--grid", type=parse_grid_string, default=None,
                   help="<nx>x<ny>:<xmin>,<xmax>,<ymin>,<ymax> in meters")
    i.add_argument("--floor-db", type=float, default=DEFAULT_FLOOR_DB)
    i.add_argument("--out-dir", required=True)
    i.add_argument("--threads", type=int, default=1)
    i.add_argument("--cg-iters", type=int, default=None)
    i.add_argument("--cg-tol", type=float, default=None)
    i.add_argument("--fista-iters", type=int, default=None)
    i.add_argument("--fista-tol", type=float, default=None)

    c = sub.add_parser("compare", help="artifact metrics of two images against a scene")
    c.add_argument("--a", required=True)
    c.add_argument("--b", required=True)
    c.add_argument("--truth", required=True)
    c.add_argument("--radius", type=float, default=0.3,
                   help="protected radius around each true ground position (m)")
    c.add_argument("--out", default=None, help="also write the JSON report here")
    return p


def _manifest_from_args(a) -> RunManifest:
    base_cg = cadmm.CadmmConfig().cg
    cg = CgConfig(a.cg_iters or base_cg.max_iters, a.cg_tol or base_cg.rel_tol)
    fista_kw = {}
    if a.fista_iters is not None:
        fista_kw["max_iters"] = a.fista_iters
    if a.fista_tol is not None:
        fista_kw["rel_tol"] = a.fista_tol
    return RunManifest(
        data=a.data, algorithm=a.algo, out_dir=a.out_dir, grid=a.grid, mu=a.mu, beta=a.beta,
        eps=a.eps, t_max=a.tmax, cg=cg, fista=FistaConfig(**fista_kw), floor_db=a.floor_db,
        threads=a.threads)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(args.spec, args.out, args.threads)
        if args.command == "image":
            return cmd_image(_manifest_from_args(args))
        report = cmd_compare(args.a, args.b, args.truth, args.radius)
        text = json.dumps(report, indent=2)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text + "\n")
        print(text)
        return EXIT_OK
    except (CliError, SceneSpecError, FormatError, ValueError, OSError) as exc:
        print(f"rtomo {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
