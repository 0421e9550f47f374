"""L2 errors on a triangulated cloud and convergence-order fits."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma

from ._validation import check_order, check_points, check_vector
from .exceptions import MissingTriangulation, TooFewLevels

__all__ = [
    "ConvergenceReport",
    "exact_disk_solution",
    "l2_error",
    "reference_error",
    "fit_order",
]

_LOG = logging.getLogger(__name__)

REFERENCE_MIN_RATIO = 4


def exact_disk_solution(s, p):
    """Solution of (-Delta)^s u = 1 on the unit disk: c_s (1 - |p|^2)_+^s."""
    s = check_order(s)
    pts = np.asarray(p, dtype=float)
    scalar = pts.ndim == 1
    pts = check_points(pts, "points", min_points=0)
    c = 1.0 / (2.0 ** (2.0 * s) * gamma(s + 1.0) ** 2)
    r2 = pts[:, 0] ** 2 + pts[:, 1] ** 2
    out = c * np.power(np.maximum(1.0 - r2, 0.0), s)
    return float(out[0]) if scalar else out


def _nodal(values, points, n):
    if callable(values):
        return np.asarray(values(points), dtype=float).reshape(n)
    return check_vector(values, n, "exact values")


def l2_error(cloud, tri, numeric, exact):
    """L2 norm over the triangulated region of the linear interpolant of ``numeric - exact``.

    ``exact`` is either nodal values or a callable on ``(m, 2)`` arrays; it is
    sampled at the cloud points. Per triangle the squared error is integrated
    by the mid-edge rule, exact for quadratics.
    """
    if tri is None or getattr(tri, "triangles", None) is None:
        raise MissingTriangulation("l2_error needs a triangulation of the cloud")
    pts = cloud.points if hasattr(cloud, "points") else np.asarray(cloud, dtype=float)
    if len(tri.vertices) != len(pts):
        raise MissingTriangulation("triangulation has %d vertices, cloud has %d points" % (len(tri.vertices), len(pts)))
    e = check_vector(numeric, len(pts), "numeric") - _nodal(exact, pts, len(pts))
    t = tri.triangles
    if not len(t):
        raise MissingTriangulation("triangulation has no triangles")
    area = np.abs(tri.signed_areas())
    ea, eb, ec = e[t[:, 0]], e[t[:, 1]], e[t[:, 2]]
    mids = (0.5 * (ea + eb)) ** 2 + (0.5 * (eb + ec)) ** 2 + (0.5 * (ec + ea)) ** 2
    return float(math.sqrt(max(float(np.sum(area * mids) / 3.0), 0.0)))


def reference_error(coarse_cloud, coarse_solution, ref_cloud, ref_solution, ref_tri, coarse_tri=None):
    """Error of a coarse solution against a finer reference, both on full cloud vectors."""
    if ref_tri is None:
        raise MissingTriangulation("reference triangulation is required")
    if ref_cloud is not coarse_cloud and ref_cloud.n_points < REFERENCE_MIN_RATIO * coarse_cloud.n_points:
        raise ValueError(
            "reference cloud has %d points, needs at least %d x the coarse %d"
            % (ref_cloud.n_points, REFERENCE_MIN_RATIO, coarse_cloud.n_points)
        )
    if coarse_tri is None:
        from .transfer import build_cdt

        coarse_tri = build_cdt(coarse_cloud)
    ref_vals = ref_tri.interpolate(check_vector(ref_solution, ref_cloud.n_points, "reference solution"),
                                   coarse_cloud.points)
    # coarse points in slivers outside the reference triangulation: boundary points carry u = 0
    miss = np.isnan(ref_vals)
    if np.any(miss):
        miss_int = miss[: coarse_cloud.n_interior]
        if np.any(miss_int):
            _LOG.warning("%d coarse interior point(s) lie outside the reference triangulation", int(miss_int.sum()))
            near = ref_cloud.index.query_many(coarse_cloud.points[miss], 1)[0][:, 0]
            ref_vals[miss] = np.asarray(ref_solution, dtype=float)[near]
        ref_vals[coarse_cloud.n_interior:][miss[coarse_cloud.n_interior:]] = 0.0
    return l2_error(coarse_cloud, coarse_tri, coarse_solution, ref_vals)


def fit_order(levels):
    """Least-squares slope of log(error) versus log(h_bar), h_bar = N_v^(-1/2).

    ``levels`` is a sequence of ``(N_v, l2_error)`` or ``(N_v, h_bar, l2_error)``.
    """
    rows = [tuple(l) for l in levels]
    if len(rows) < 3:
        raise TooFewLevels("need at least 3 levels to fit an order, got %d" % len(rows))
    nv = np.array([r[0] for r in rows], dtype=float)
    err = np.array([r[-1] for r in rows], dtype=float)
    if np.any(err <= 0) or np.any(nv <= 0):
        raise ValueError("errors and point counts must be positive")
    hbar = nv ** -0.5
    return float(np.polyfit(np.log(hbar), np.log(err), 1)[0])


@dataclass
class ConvergenceReport:
    s: float
    method: str
    levels: list = field(default_factory=list)  # (N_v, h_bar, l2_error)

    def add(self, n_v, l2):
        self.levels.append((int(n_v), float(n_v) ** -0.5, float(l2)))
        self.levels.sort(key=lambda r: r[0])

    @property
    def fitted_order_in_hbar(self):
        return fit_order(self.levels)

    def to_csv(self, path=None):
        lines = ["N_v,h_bar,l2_error"]
        lines += ["%d,%r,%r" % (n, h, e) for n, h, e in self.levels]
        if len(self.levels) >= 3:
            lines.append("# fitted_order=%r" % self.fitted_order_in_hbar)
        else:
            lines.append("# fitted_order=nan")
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def read_csv(cls, path, s=float("nan"), method=""):
        rep = cls(s, method)
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#") or line.startswith("N_v"):
                    continue
                n, _, e = line.split(",")
                rep.add(int(n), float(e))
        return rep
