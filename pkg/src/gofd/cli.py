"""Command-line front end: ``gofd {kernel,solve,convergence,plot}``.

Exit codes: 0 success, 1 domain error (a JSON error document is printed and
written to the output directory), 2 usage error.
"""

import argparse
import configparser
import json
import logging
import math
import os
import re
import sys
from importlib import resources

import numpy as np

from . import geometry, point_cloud
from .error_metrics import ConvergenceReport, exact_disk_solution, l2_error, reference_error
from .exceptions import GofdError
from .solver import FractionalProblem, save_solution, solve
from .spectral_kernel import FractionalOrder, compute_stencil, save_stencil
from .transfer import build_cdt

_LOG = logging.getLogger("gofd")

SECTION = "experiment"
DEFAULTS = {
    "domain": "disk",
    "s": "0.5",
    "cloud": "rings",
    "ladder": "10,20,40,80",
    "size": "20",
    "method": "both",
    "n": "5",
    "perturb": "0",
    "seeds": "1",
    "seed": "0",
    "tol": "1e-10",
    "f": "1",
    "reference_factor": "16",
    "reference_tol": "1e-12",
    "fd_box_factor": "1.2",
}

EXAMPLE_PRESETS = {
    "1": {"domain": "disk", "s": "0.25,0.5,0.75", "cloud": "rings", "ladder": "10,20,40,80", "method": "both",
          "perturb": "0.4", "seeds": "5"},
    "2": {"domain": "lshape", "s": "0.25,0.5,0.75", "cloud": "fixture", "ladder": "500,1000,2000",
          "method": "both", "perturb": "0", "seeds": "1"},
    "3": {"domain": "wavy", "s": "0.25,0.5,0.75", "cloud": "fixture", "ladder": "500,1000,2000",
          "method": "both", "perturb": "0", "seeds": "1"},
}

FIXTURE_SIZES = (500, 1000, 2000)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _float_list(text):
    try:
        return [float(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError:
        raise UsageError("expected a comma-separated list of numbers, got %r" % text) from None


def _int_list(text):
    try:
        return [int(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError:
        raise UsageError("expected a comma-separated list of integers, got %r" % text) from None


def resolve_config(args):
    """Merge defaults, example presets, the config file and flags (later wins)."""
    cfg = dict(DEFAULTS)
    example = getattr(args, "paper_example", None)
    if example:
        cfg.update(EXAMPLE_PRESETS[example])
    if getattr(args, "config", None):
        parser = configparser.ConfigParser()
        if not parser.read(args.config):
            raise UsageError("cannot read config file %s" % args.config)
        if parser.has_section(SECTION):
            for k, v in parser.items(SECTION):
                if k not in DEFAULTS and k != "out":
                    raise UsageError("unknown config key %r" % k)
                cfg[k] = v
    for key in list(DEFAULTS) + ["out"]:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = str(v)
    if cfg["method"] not in ("mls", "delaunay", "both"):
        raise UsageError("method must be mls, delaunay or both")
    return cfg


def echo_config(cfg, out_dir):
    parser = configparser.ConfigParser()
    parser[SECTION] = {k: str(v) for k, v in sorted(cfg.items())}
    with open(os.path.join(out_dir, "config.ini"), "w") as fh:
        parser.write(fh)


def _methods(cfg):
    return ["mls", "delaunay"] if cfg["method"] == "both" else [cfg["method"]]


def make_domain(spec):
    if spec == "disk":
        return geometry.unit_disk()
    if spec == "lshape":
        return geometry.l_shape()
    if spec == "wavy":
        return geometry.wavy_domain()
    if spec.startswith("file:"):
        return geometry.load_domain(spec[5:])
    raise UsageError("unknown domain %r (disk, lshape, wavy or file:PATH)" % spec)


def _domain_name(spec):
    if spec.startswith("file:"):
        return os.path.splitext(os.path.basename(spec[5:]))[0]
    return spec


def fixture_path(domain_name, size):
    return resources.files("gofd").joinpath("fixtures", "%s_%d.mesh" % (domain_name, size))


def make_cloud(family, size, domain, domain_name="disk", seed=0):
    """Cloud of the given family; ``size`` is J for rings and a target count otherwise."""
    if family == "rings":
        if not isinstance(domain, geometry.Disk):
            raise UsageError("the rings family needs the disk domain")
        return point_cloud.cloud_rings(int(size), domain)
    if family == "graded":
        return point_cloud.cloud_graded(domain, int(size), s=0.5, seed=seed)
    if family == "quasi":
        return point_cloud.cloud_quasi_uniform(domain, int(size), seed=seed)
    if family == "grid":
        return point_cloud.cloud_grid_interior(domain, math.sqrt(domain.area() / float(size)))
    if family == "fixture":
        path = fixture_path(domain_name, int(size))
        if not path.is_file():
            raise UsageError("no fixture ladder for %s at size %d" % (domain_name, int(size)))
        with resources.as_file(path) as p:
            return point_cloud.cloud_from_mesh_file(str(p), domain)
    if family.startswith("file:"):
        return point_cloud.cloud_from_mesh_file(family[5:], domain)
    raise UsageError("unknown cloud family %r" % family)


def _source(cfg):
    try:
        return float(cfg["f"])
    except ValueError:
        raise UsageError("f must be a constant") from None


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_kernel(args):
    s = float(args.s)
    order = FractionalOrder.limit(s) if s in (0.0, 1.0) else FractionalOrder(s)
    table = compute_stencil(order, args.P, resolution=args.M)
    os.makedirs(args.out, exist_ok=True)
    save_stencil(table, os.path.join(args.out, "stencil_s%s_P%d.bin" % (s, args.P)))
    P = table.half_extent
    with open(os.path.join(args.out, "stencil_s%s_P%d.csv" % (s, args.P)), "w") as fh:
        fh.write("p\\q," + ",".join(str(q) for q in range(-P, P + 1)) + "\n")
        for p in range(-P, P + 1):
            fh.write("%d," % p + ",".join(repr(float(v)) for v in table.values[p + P]) + "\n")
    print(json.dumps({"s": s, "P": P, "M": table.quadrature_resolution, "T00": table.center}))
    return 0


def cmd_solve(args):
    cfg = resolve_config(args)
    out = cfg.get("out") or "."
    os.makedirs(out, exist_ok=True)
    echo_config(cfg, out)
    s_list = _float_list(cfg["s"])
    if len(s_list) != 1:
        raise UsageError("solve takes a single order s")
    domain = make_domain(cfg["domain"])
    cloud = make_cloud(cfg["cloud"], cfg["size"], domain, _domain_name(cfg["domain"]), int(cfg["seed"]))
    if float(cfg["perturb"]) > 0:
        cloud = point_cloud.perturb(cloud, float(cfg["perturb"]) * cloud.h_bar, seed=int(cfg["seed"]))
    problem = FractionalProblem(domain, s_list[0], _source(cfg), float(cfg["fd_box_factor"]))
    summary = {}
    for method in _methods(cfg):
        rep = solve(problem, cloud, method, n=int(cfg["n"]), tol=float(cfg["tol"]))
        rep.to_json(os.path.join(out, "report_%s.json" % method))
        save_solution(rep, cloud, os.path.join(out, "solution_%s.txt" % method))
        summary[method] = {"iterations": rep.iterations, "final_relative_residual": rep.final_relative_residual,
                           "N_FD": rep.N_FD}
    print(json.dumps(summary))
    return 0


def _error_for(cloud, tri, u_full, s, domain, f, reference):
    if isinstance(domain, geometry.Disk) and domain.radius == 1.0 and tuple(domain.center) == (0.0, 0.0) and f == 1.0:
        return l2_error(cloud, tri, u_full, lambda P: exact_disk_solution(s, P))
    ref_cloud, ref_u, ref_tri = reference
    return reference_error(cloud, u_full, ref_cloud, ref_u, ref_tri, coarse_tri=tri)


def _reference(cfg, domain, s, finest):
    n_ref = int(cfg["reference_factor"]) * finest
    ref_cloud = point_cloud.cloud_quasi_uniform(domain, n_ref, seed=int(cfg["seed"]) + 7919)
    ref_tri = build_cdt(ref_cloud)
    rep = solve(FractionalProblem(domain, s, _source(cfg), float(cfg["fd_box_factor"])), ref_cloud, "delaunay",
                tol=float(cfg["reference_tol"]), triangulation=ref_tri)
    return ref_cloud, rep.full_solution(ref_cloud), ref_tri


def run_ladder(cfg, domain, s, method, seed, csv_path, reference=None, clouds=None):
    """Run one ladder; the CSV is rewritten after every level so partial results survive."""
    name = _domain_name(cfg["domain"])
    f = _source(cfg)
    report = ConvergenceReport(s, method)
    for k, size in enumerate(_int_list(cfg["ladder"])):
        cloud = clouds[k] if clouds is not None else make_cloud(cfg["cloud"], size, domain, name, seed)
        if float(cfg["perturb"]) > 0:
            cloud = point_cloud.perturb(cloud, float(cfg["perturb"]) * cloud.h_bar, seed=seed * 1000 + k)
        tri = build_cdt(cloud)
        rep = solve(FractionalProblem(domain, s, f, float(cfg["fd_box_factor"])), cloud, method, n=int(cfg["n"]),
                    tol=float(cfg["tol"]), triangulation=tri if method == "delaunay" else None)
        err = _error_for(cloud, tri, rep.full_solution(cloud), s, domain, f, reference)
        report.add(cloud.n_points, err)
        report.to_csv(csv_path)
        _LOG.info("s=%g %s level %d: N_v=%d error=%.4e", s, method, k, cloud.n_points, err)
    return report


def write_envelope(reports, path):
    levels = [r.levels for r in reports]
    with open(path, "w") as fh:
        fh.write("N_v,h_bar,min_error,median_error,max_error\n")
        for rows in zip(*levels):
            errs = np.array([r[2] for r in rows])
            nv = int(np.median([r[0] for r in rows]))
            fh.write("%d,%r,%r,%r,%r\n" % (nv, nv ** -0.5, float(errs.min()), float(np.median(errs)),
                                          float(errs.max())))


def cmd_convergence(args):
    cfg = resolve_config(args)
    out = cfg.get("out") or "."
    os.makedirs(out, exist_ok=True)
    echo_config(cfg, out)
    domain = make_domain(cfg["domain"])
    name = _domain_name(cfg["domain"])
    ladder = _int_list(cfg["ladder"])
    if len(ladder) < 3:
        raise UsageError("a convergence ladder needs at least 3 sizes")
    seeds = int(cfg["seeds"])
    base_seed = int(cfg["seed"])
    needs_ref = not (isinstance(domain, geometry.Disk) and _source(cfg) == 1.0)
    summary = {}
    for s in _float_list(cfg["s"]):
        reference = None
        if needs_ref:
            finest = make_cloud(cfg["cloud"], ladder[-1], domain, name, base_seed).n_points
            reference = _reference(cfg, domain, s, finest)
        for method in _methods(cfg):
            stem = "convergence_%s_%s_%s_s%s" % (name, cfg["cloud"].replace(":", "_").replace("/", "_"), method, s)
            if seeds > 1:
                reps = []
                for k in range(seeds):
                    reps.append(run_ladder(cfg, domain, s, method, base_seed + k,
                                           os.path.join(out, "%s_seed%d.csv" % (stem, k)), reference))
                write_envelope(reps, os.path.join(out, stem + "_envelope.csv"))
                summary[stem] = [r.fitted_order_in_hbar for r in reps]
            else:
                rep = run_ladder(cfg, domain, s, method, base_seed, os.path.join(out, stem + ".csv"), reference)
                summary[stem] = rep.fitted_order_in_hbar
    print(json.dumps(summary, indent=1))
    return 0


_S_IN_NAME = re.compile(r"_s([0-9.]+?)(?:_seed\d+)?\.csv$")


def plot_script(csv_paths, script_dir, s=None):
    """Text of a standalone matplotlib script drawing log-log error curves."""
    lines = [
        "# Log-log plot of L2 error against N_v for convergence CSV files.",
        "# Generated file; edit freely.",
    ]
    series = []
    for path in csv_paths:
        if not os.path.isfile(path):
            _LOG.warning("skipping missing series %s", path)
            continue
        rep = ConvergenceReport.read_csv(path)
        if not rep.levels:
            _LOG.warning("skipping empty series %s", path)
            continue
        m = _S_IN_NAME.search(os.path.basename(path))
        order_s = s if s is not None else (float(m.group(1).rstrip(".")) if m else None)
        series.append((os.path.relpath(path, script_dir), rep, order_s))
    if not series:
        return "\n".join(lines) + "\n"
    lines += [
        "import os",
        "import matplotlib",
        "matplotlib.use('Agg')",
        "import matplotlib.pyplot as plt",
        "",
        "HERE = os.path.dirname(os.path.abspath(__file__))",
        "",
        "",
        "def read(path):",
        "    nv, err = [], []",
        "    with open(os.path.join(HERE, path)) as fh:",
        "        for line in fh:",
        "            if line.startswith('#') or line.startswith('N_v'):",
        "                continue",
        "            a, _, c = line.strip().split(',')",
        "            nv.append(int(a))",
        "            err.append(float(c))",
        "    return nv, err",
        "",
        "",
        "fig, ax = plt.subplots()",
    ]
    for rel, rep, order_s in series:
        lines.append("nv, err = read(%r)" % rel)
        lines.append("ax.loglog(nv, err, 'o-', label=%r)" % os.path.splitext(os.path.basename(rel))[0])
        first, last = rep.levels[0], rep.levels[-1]
        orders = [2.0] if order_s is None else [min(1.0, order_s + 0.5), 2.0]
        for p in orders:
            # triangle hangs below the segment joining the first and last points, slope -p/2 in N_v
            x0, x1 = first[0], last[0]
            y0 = first[2] * 0.5
            y1 = y0 * (x1 / x0) ** (-p / 2.0)
            lines.append("ax.loglog([%r, %r, %r, %r], [%r, %r, %r, %r], 'k-', lw=0.8)"
                         % (x0, x1, x1, x0, y0, y1, y0, y0))
            lines.append("ax.text(%r, %r, 'order %g')" % (x1, y0, p))
    lines += [
        "ax.set_xlabel('N_v')",
        "ax.set_ylabel('L2 error')",
        "ax.legend(fontsize='small')",
        "fig.savefig(os.path.join(HERE, 'convergence.png'), dpi=150)",
    ]
    return "\n".join(lines) + "\n"


def cmd_plot(args):
    out = args.out or "plot_convergence.py"
    script_dir = os.path.dirname(os.path.abspath(out))
    os.makedirs(script_dir, exist_ok=True)
    s = _float_list(args.s)[0] if args.s else None
    text = plot_script(args.csv, script_dir, s)
    with open(out, "w") as fh:
        fh.write(text)
    print(out)
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="gofd", description="Meshfree grid-overlay solver for the fractional Laplacian.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    k = sub.add_parser("kernel", help="compute and dump a stencil table")
    k.add_argument("--s", type=float, required=True)
    k.add_argument("--P", type=int, default=8)
    k.add_argument("--M", type=int, default=None)
    k.add_argument("--out", default=".")

    def common(q):
        q.add_argument("--config")
        q.add_argument("--domain")
        q.add_argument("--s")
        q.add_argument("--method", choices=["mls", "delaunay", "both"])
        q.add_argument("--n", type=int)
        q.add_argument("--perturb", type=float, help="perturbation level as a multiple of h_bar")
        q.add_argument("--seed", type=int)
        q.add_argument("--tol", type=float)
        q.add_argument("--f", help="constant source value")
        q.add_argument("--cloud", help="rings, graded, quasi, grid, fixture or file:PATH")
        q.add_argument("--out")

    so = sub.add_parser("solve", help="single solve")
    common(so)
    so.add_argument("--size", help="J for rings, target point count otherwise")

    c = sub.add_parser("convergence", help="convergence study over a ladder of clouds")
    common(c)
    c.add_argument("--ladder")
    c.add_argument("--seeds", type=int)
    c.add_argument("--paper-example", choices=sorted(EXAMPLE_PRESETS), dest="paper_example")

    pl = sub.add_parser("plot", help="emit a plotting script for convergence CSVs")
    pl.add_argument("csv", nargs="*")
    pl.add_argument("--s")
    pl.add_argument("--out")
    return p


def _report_error(exc, out):
    doc = {"kind": getattr(exc, "kind", type(exc).__name__), "message": str(exc)}
    text = json.dumps(doc)
    print(text)
    if out:
        try:
            os.makedirs(out, exist_ok=True)
            with open(os.path.join(out, "error.json"), "w") as fh:
                fh.write(text + "\n")
        except OSError:
            pass


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print("gofd: error: %s" % exc, file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2
    handler = {"kernel": cmd_kernel, "solve": cmd_solve, "convergence": cmd_convergence, "plot": cmd_plot}
    try:
        return handler[args.command](args)
    except UsageError as exc:
        print("gofd: error: %s" % exc, file=sys.stderr)
        return 2
    except (GofdError, ValueError, OSError) as exc:
        _report_error(exc, getattr(args, "out", None))
        return 1


if __name__ == "__main__":
    sys.exit(main())
