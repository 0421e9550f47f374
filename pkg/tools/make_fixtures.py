"""Regenerate the mesh-file ladders shipped in src/gofd/fixtures."""

import os
import sys

from gofd import geometry, point_cloud
from gofd.transfer import build_cdt

SIZES = (500, 1000, 2000)
DOMAINS = {"lshape": geometry.l_shape, "wavy": geometry.wavy_domain}


def write_mesh(cloud, tri, path):
    with open(path, "w") as fh:
        fh.write("mesh %d %d\n" % (cloud.n_points, tri.n_triangles))
        for x, y in cloud.points:
            fh.write("%r %r\n" % (float(x), float(y)))
        for a, b, c in tri.triangles + 1:
            fh.write("%d %d %d\n" % (a, b, c))


def main(out_dir):
    os.makedirs(out_dir, exist_ok=True)
    for name, make in DOMAINS.items():
        domain = make()
        for n in SIZES:
            cloud = point_cloud.cloud_quasi_uniform(domain, n, seed=n)
            write_mesh(cloud, build_cdt(cloud), os.path.join(out_dir, "%s_%d.mesh" % (name, n)))
            print(name, n, cloud.n_points)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "src", "gofd", "fixtures"))
