"""Writes interp_fixture.hpp: scipy reference values for the scattered interpolators."""
import numpy as np
from scipy.interpolate import CloughTocher2DInterpolator, LinearNDInterpolator, NearestNDInterpolator
from scipy.spatial import Delaunay

rng = np.random.default_rng(20240611)
n = 60
pts = set()
while len(pts) < n:
    pts.add((int(rng.integers(0, 200)), int(rng.integers(0, 200))))
pts = np.array(sorted(pts, key=lambda p: rng.random()), dtype=float)
vals = np.sin(pts[:, 0] / 30.0) * np.cos(pts[:, 1] / 45.0) + 0.01 * pts[:, 0]

tri = Delaunay(pts)
q = rng.uniform(0, 200, size=(40, 2))
lin = LinearNDInterpolator(tri, vals)(q)
cub = CloughTocher2DInterpolator(tri, vals, tol=1e-13, maxiter=20000)(q)
near = NearestNDInterpolator(pts, vals)(q)

def arr(name, a, fmt="{:.17g}"):
    body = ", ".join("NAN" if np.isnan(v) else fmt.format(v) for v in np.ravel(a))
    return f"inline const std::vector<double> {name} = {{{body}}};\n"

simp = sorted(tuple(sorted(s)) for s in tri.simplices.tolist())
with open("interp_fixture.hpp", "w") as f:
    f.write("// Generated by gen_interp.py (scipy %s).\n#pragma once\n#include <cmath>\n#include <vector>\n\n" % __import__("scipy").__version__)
    f.write("namespace fixture {\n")
    f.write(arr("kPoints", pts, "{:.0f}"))
    f.write(arr("kValues", vals))
    f.write(arr("kQuery", q))
    f.write(arr("kLinear", lin))
    f.write(arr("kCubic", cub))
    f.write(arr("kNearest", near))
    f.write("inline const std::vector<int> kSimplices = {%s};\n" % ", ".join(str(i) for s in simp for i in s))
    f.write("}  // namespace fixture\n")
