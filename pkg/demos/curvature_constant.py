"""The flatness constant relating the base curvature to the field strength.

For a conformally flat lift, a fixed combination of the base Ricci scalar
and the squared Killing vector has the same value at every point.
"""

from kkflat import catalog as C
from kkflat import flatness as F

for lam in (0.5, 1.0, 2.0):
    inst = C.instantiate("const_phi", {"lam": lam})
    const = F.curvature_constant(inst.lift, inst.sample(10))
    print(f"constant phi, lam={lam}: c = {const.c:.12f} (3 lam^2 = {3 * lam**2:g}), spread {const.spread:.1e}")

for A in (0.5, 1.0, 2.0):
    inst = C.instantiate("sol1_static", {"A": A, "B": 0.5, "a": 4.0})
    const = F.curvature_constant(inst.lift, inst.sample(10))
    print(f"time-like static, A={A}: c = {const.c:.12f} (-3A/4 = {-0.75 * A:g}), spread {const.spread:.1e}")
